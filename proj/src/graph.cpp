#include "hygnn/graph.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hygnn {

void HybridGraphConfig::validate() const {
  if (scales < 1) throw std::invalid_argument("graph needs at least one scale");
  if (channels < 1) throw std::invalid_argument("graph needs at least one channel");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
}

AdapterNet init_adapter(Rng& rng, std::size_t channels, std::size_t hidden) {
  AdapterNet net;
  net.hidden_weight = random_normal(rng, {hidden, channels}, std::sqrt(2.0 / channels));
  net.hidden_bias = Tensor::zeros({hidden}, true);
  net.out_weight = random_normal(rng, {channels * channels, hidden}, 0.1 / std::sqrt(hidden));
  // Bias starts at the identity matrix so the predicted kernel starts near a pass-through.
  std::vector<double> eye(channels * channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) eye[c * channels + c] = 1.0;
  net.out_bias = Tensor({channels * channels}, std::move(eye), true);
  return net;
}

GraphWeights init_graph_weights(const HybridGraphConfig& config, Rng& rng) {
  config.validate();
  const auto C = config.channels;
  GraphWeights w;
  for (auto& d : w.domains) {
    d.scale_edge = make_conv(rng, C, C, 3);
    d.scale_link = make_conv(rng, 1, C, 1);
    if (config.enable_cross_domain) d.cross_domain_gru = make_conv_gru(rng, C);
    d.cross_scale_gru = make_conv_gru(rng, C);
    d.readout = make_conv(rng, 1, config.scales * C, 1);
  }
  if (config.enable_cross_domain) {
    std::array<DirectionWeights, 2> dirs;
    for (auto& dir : dirs) {
      dir.domain_edge = make_conv(rng, C, C, 3);
      dir.domain_link = make_conv(rng, 1, C, 1);
      if (config.enable_adapter) {
        dir.phi = init_adapter(rng, C, C);
        dir.eta = init_adapter(rng, C, C);
      }
    }
    w.directions = std::move(dirs);
  }
  return w;
}

EdgeEmbedding cross_scale_edge_embed(const NodeState& from, const NodeState& to,
                                     const ConvParams& edge_conv) {
  if (from.domain != to.domain) {
    throw std::invalid_argument("cross-scale edge between different domains");
  }
  if (from.scale == to.scale) throw std::invalid_argument("cross-scale edge within one scale");
  return {EdgeKind::cross_scale, from.domain, from.scale, to.domain, to.scale,
          conv2d(sub(from.h, to.h), edge_conv)};
}

Tensor adapter_predict(const Tensor& source, const AdapterNet& net) {
  const auto B = source.dim(0), C = source.dim(1);
  auto pooled = global_avg_pool(source);
  auto hidden = relu(linear(pooled, net.hidden_weight, net.hidden_bias));
  auto flat = linear(hidden, net.out_weight, net.out_bias);
  if (flat.dim(1) != C * C) {
    throw ShapeError("adapter emits " + std::to_string(flat.dim(1)) + " values, expected C^2 = " +
                     std::to_string(C * C));
  }
  return flat.reshape({B, C, C, 1, 1});
}

namespace {

void check_cross_domain_pair(const NodeState& source, const NodeState& target) {
  if (source.domain == target.domain) {
    throw std::invalid_argument("cross-domain edge within one domain");
  }
  if (source.scale != target.scale) {
    throw std::invalid_argument("cross-domain edge between different scales");
  }
}

Tensor link_weight(const Tensor& edge, const ConvParams& link) { return sigmoid(conv2d(edge, link)); }

}  // namespace

EdgeEmbedding cross_domain_edge_embed(const NodeState& source, const NodeState& target,
                                      const DirectionWeights& weights, bool enable_adapter) {
  check_cross_domain_pair(source, target);
  Tensor adapted = source.h;
  if (enable_adapter) {
    if (!weights.phi) throw std::invalid_argument("adapter enabled but no edge adapter weights");
    adapted = dynamic_conv(target.h, adapter_predict(source.h, *weights.phi));
  }
  return {EdgeKind::cross_domain, source.domain, source.scale, target.domain, target.scale,
          conv2d(sub(adapted, target.h), weights.domain_edge)};
}

Tensor cross_scale_message(const NodeState& from, const EdgeEmbedding& edge,
                           const ConvParams& link) {
  if (edge.kind != EdgeKind::cross_scale) {
    throw std::invalid_argument("cross_scale_message given a cross-domain edge");
  }
  if (edge.source_domain != from.domain || edge.source_scale != from.scale) {
    throw std::invalid_argument("cross_scale_message: edge does not start at the given node");
  }
  return gate_channels(link_weight(edge.e, link), from.h);
}

Tensor cross_domain_message(const NodeState& source, const NodeState& target,
                            const EdgeEmbedding& edge, const DirectionWeights& weights,
                            bool enable_adapter) {
  if (edge.kind != EdgeKind::cross_domain) {
    throw std::invalid_argument("cross_domain_message given a cross-scale edge");
  }
  check_cross_domain_pair(source, target);
  if (edge.source_domain != source.domain || edge.target_domain != target.domain ||
      edge.source_scale != source.scale) {
    throw std::invalid_argument("cross_domain_message: edge does not connect the given nodes");
  }
  auto gated = gate_channels(link_weight(edge.e, weights.domain_link), source.h);
  if (!enable_adapter) return gated;
  if (!weights.eta) throw std::invalid_argument("adapter enabled but no message adapter weights");
  return dynamic_conv(target.h, adapter_predict(gated, *weights.eta));
}

NodeState node_update_two_stage(const NodeState& node, const Tensor& cross_domain_msg,
                                const Tensor& cross_scale_msg, const ConvGruParams& first,
                                const ConvGruParams& second) {
  if (cross_domain_msg.shape() != node.h.shape() || cross_scale_msg.shape() != node.h.shape()) {
    throw ShapeError("node_update_two_stage: message shapes must match state " +
                     to_string(node.h.shape()));
  }
  auto intermediate = conv_gru_step(node.h, cross_domain_msg, first);
  return {node.domain, node.scale, conv_gru_step(intermediate, cross_scale_msg, second)};
}

std::vector<NodeState> propagate(const std::vector<NodeState>& states,
                                 const HybridGraphConfig& config, const GraphWeights& weights) {
  config.validate();
  const auto N = config.scales;
  if (states.size() != 2 * N) {
    throw std::invalid_argument("propagate expects " + std::to_string(2 * N) + " states, got " +
                                std::to_string(states.size()));
  }
  for (std::size_t d = 0; d < 2; ++d)
    for (std::size_t i = 0; i < N; ++i) {
      const auto& s = states[d * N + i];
      if (domain_index(s.domain) != d || s.scale != i) {
        throw std::invalid_argument("propagate: states must be ordered by (domain, scale)");
      }
    }

  std::vector<NodeState> current = states;
  for (std::size_t k = 0; k < config.iterations; ++k) {
    // Stage one: every node reads its partner's state from the previous iteration.
    std::vector<NodeState> intermediate = current;
    if (config.enable_cross_domain) {
      if (!weights.directions) throw std::invalid_argument("cross-domain weights missing");
      for (std::size_t t = 0; t < 2; ++t) {
        const std::size_t s = 1 - t;
        const auto& dir = (*weights.directions)[s];
        const auto& gru = weights.domains[t].cross_domain_gru;
        if (!gru) throw std::invalid_argument("cross-domain GRU weights missing");
        for (std::size_t i = 0; i < N; ++i) {
          const auto& source = current[s * N + i];
          const auto& target = current[t * N + i];
          auto edge = cross_domain_edge_embed(source, target, dir, config.enable_adapter);
          auto msg = cross_domain_message(source, target, edge, dir, config.enable_adapter);
          intermediate[t * N + i].h = conv_gru_step(target.h, msg, *gru);
        }
      }
    }

    // Stage two: mean of incoming cross-scale messages over intermediate states.
    std::vector<NodeState> next = intermediate;
    if (N >= 2) {
      for (std::size_t d = 0; d < 2; ++d) {
        const auto& dw = weights.domains[d];
        for (std::size_t i = 0; i < N; ++i) {
          const auto& node = intermediate[d * N + i];
          Tensor total;
          for (std::size_t j = 0; j < N; ++j) {
            if (j == i) continue;
            const auto& from = intermediate[d * N + j];
            auto edge = cross_scale_edge_embed(from, node, dw.scale_edge);
            auto msg = cross_scale_message(from, edge, dw.scale_link);
            total = total.defined() ? add(total, msg) : msg;
          }
          auto aggregated = N == 2 ? total : scale(total, 1.0 / static_cast<double>(N - 1));
          next[d * N + i].h = conv_gru_step(node.h, aggregated, dw.cross_scale_gru);
        }
      }
    }
    current = std::move(next);
  }
  return current;
}

Tensor readout(const FeaturePyramid& pyramid, const ConvParams& head) {
  if (pyramid.states.empty()) throw std::invalid_argument("readout of an empty pyramid");
  return conv2d(concat_channels(pyramid.states), head);
}

Tensor readout(const std::vector<NodeState>& states, const ConvParams& head) {
  if (states.empty()) throw std::invalid_argument("readout of no states");
  FeaturePyramid pyramid{states.front().domain, {}};
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].domain != pyramid.domain) throw std::invalid_argument("readout mixes domains");
    if (states[i].scale != i) throw std::invalid_argument("readout states out of scale order");
    pyramid.states.push_back(states[i].h);
  }
  return readout(pyramid, head);
}

std::vector<GraphEdge> graph_edges(const HybridGraphConfig& config) {
  std::vector<GraphEdge> edges;
  for (auto d : {Domain::counting, Domain::localization})
    for (std::size_t i = 0; i < config.scales; ++i)
      for (std::size_t j = 0; j < config.scales; ++j)
        if (i != j) edges.push_back({EdgeKind::cross_scale, d, i, d, j});
  if (config.enable_cross_domain) {
    for (auto d : {Domain::counting, Domain::localization})
      for (std::size_t i = 0; i < config.scales; ++i)
        edges.push_back({EdgeKind::cross_domain, d, i, other_domain(d), i});
  }
  return edges;
}

}  // namespace hygnn
