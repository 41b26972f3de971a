#include "hygnn/model.hpp"

#include <stdexcept>

namespace hygnn {

ModelConfig ModelConfig::make(std::size_t scales, std::size_t iterations, double width_multiplier,
                              std::size_t node_channels) {
  ModelConfig c;
  c.dfl.width_multiplier = width_multiplier;
  c.dfl.scales = default_scales(scales);
  c.dfl.node_channels = node_channels;
  c.graph.scales = scales;
  c.graph.iterations = iterations;
  c.graph.channels = node_channels;
  return c;
}

void ModelConfig::validate() const {
  dfl.validate();
  graph.validate();
  if (graph.scales != dfl.scale_count()) {
    throw std::invalid_argument("graph scale count does not match the pyramid scales");
  }
  if (graph.channels != dfl.node_channels) {
    throw std::invalid_argument("graph channels do not match DFL node channels");
  }
}

HyGnnModel::HyGnnModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  dfl_ = init_dfl_weights(config_.dfl, rng);
  graph_ = init_graph_weights(config_.graph, rng);
  register_parameters();
}

namespace {

void add_conv(std::vector<NamedParameter>& out, const std::string& prefix, const ConvParams& p) {
  out.push_back({prefix + ".weight", p.kernel});
  out.push_back({prefix + ".bias", p.bias});
}

void add_gru(std::vector<NamedParameter>& out, const std::string& prefix, const ConvGruParams& p) {
  add_conv(out, prefix + ".reset", p.reset);
  add_conv(out, prefix + ".update", p.update);
  add_conv(out, prefix + ".candidate", p.candidate);
}

void add_adapter(std::vector<NamedParameter>& out, const std::string& prefix,
                 const AdapterNet& a) {
  out.push_back({prefix + ".hidden.weight", a.hidden_weight});
  out.push_back({prefix + ".hidden.bias", a.hidden_bias});
  out.push_back({prefix + ".out.weight", a.out_weight});
  out.push_back({prefix + ".out.bias", a.out_bias});
}

}  // namespace

void HyGnnModel::register_parameters() {
  params_.clear();
  for (std::size_t i = 0; i < dfl_.front_end.size(); ++i) {
    add_conv(params_, "front_end." + std::to_string(i), dfl_.front_end[i]);
  }
  for (auto d : {Domain::counting, Domain::localization}) {
    const auto& series = dfl_.back_end[domain_index(d)];
    for (std::size_t i = 0; i < series.size(); ++i) {
      add_conv(params_, std::string("back_end.") + domain_name(d) + "." + std::to_string(i),
               series[i]);
    }
  }
  for (auto d : {Domain::counting, Domain::localization}) {
    const auto& w = graph_.domains[domain_index(d)];
    const std::string prefix = std::string("graph.") + domain_name(d);
    add_conv(params_, prefix + ".scale_edge", w.scale_edge);
    add_conv(params_, prefix + ".scale_link", w.scale_link);
    if (w.cross_domain_gru) add_gru(params_, prefix + ".cross_domain_gru", *w.cross_domain_gru);
    add_gru(params_, prefix + ".cross_scale_gru", w.cross_scale_gru);
    add_conv(params_, prefix + ".readout", w.readout);
  }
  if (graph_.directions) {
    for (auto d : {Domain::counting, Domain::localization}) {
      const auto& dir = (*graph_.directions)[domain_index(d)];
      const std::string prefix = std::string("graph.") + domain_name(d) + "_to_" +
                                 domain_name(other_domain(d));
      add_conv(params_, prefix + ".domain_edge", dir.domain_edge);
      add_conv(params_, prefix + ".domain_link", dir.domain_link);
      if (dir.phi) add_adapter(params_, prefix + ".phi", *dir.phi);
      if (dir.eta) add_adapter(params_, prefix + ".eta", *dir.eta);
    }
  }
}

std::vector<Tensor> HyGnnModel::parameter_tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

std::size_t HyGnnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

std::vector<NodeState> HyGnnModel::initial_states(const Tensor& image) const {
  auto shared = front_end(image, dfl_.front_end);
  std::vector<NodeState> states;
  for (auto d : {Domain::counting, Domain::localization}) {
    auto pyramid = init_node_states(back_end(shared, d, dfl_), d, config_.dfl);
    for (std::size_t i = 0; i < pyramid.states.size(); ++i) {
      states.push_back({d, i, pyramid.states[i]});
    }
  }
  return states;
}

ModelOutput HyGnnModel::forward(const Tensor& image) const {
  const auto N = config_.graph.scales;
  auto states = propagate(initial_states(image), config_.graph, graph_);
  std::vector<NodeState> counting(states.begin(), states.begin() + N);
  std::vector<NodeState> localization(states.begin() + N, states.end());
  return {readout(counting, graph_.domains[0].readout),
          readout(localization, graph_.domains[1].readout)};
}

std::vector<double> predicted_counts(const Tensor& density) {
  if (density.rank() != 4) throw ShapeError("predicted_counts expects [B,1,H,W]");
  const auto B = density.dim(0);
  const auto per = density.numel() / B;
  auto v = density.data();
  std::vector<double> counts(B, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < per; ++i) counts[b] += v[b * per + i];
  return counts;
}

}  // namespace hygnn
