#include "hygnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>

#include "hygnn/init.hpp"
#include "hygnn/model.hpp"
#include "hygnn/ops.hpp"

namespace hygnn {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& r : rows) {
    // NaN must fail the check.
    if (!(r.rel_error <= worst)) worst = std::isnan(r.rel_error) ? INFINITY : r.rel_error;
  }
  return worst;
}

GradCheckOptions GradCheckOptions::full() {
  GradCheckOptions o;
  o.scales = 3;
  o.iterations = 2;
  o.image_size = 32;
  o.samples = 40;
  return o;
}

namespace {

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

Tensor uniform(Rng& rng, Shape shape, double lo, double hi, bool tracked) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), tracked);
}

using OpFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct OpCase {
  std::string name;
  std::vector<std::string> input_names;
  std::vector<Tensor> inputs;
  OpFn fn;
};

ConvParams conv_params(const std::vector<Tensor>& in, std::size_t k, std::size_t b, std::size_t stride,
                       std::size_t padding, std::size_t dilation) {
  ConvParams p;
  p.kernel = in[k];
  p.bias = in[b];
  p.stride = stride;
  p.padding = padding;
  p.dilation = dilation;
  return p;
}

std::vector<OpCase> op_cases(Rng& rng) {
  auto n = [&](Shape s) { return random_normal(rng, std::move(s), 1.0); };
  auto u = [&](Shape s, double lo, double hi) { return uniform(rng, std::move(s), lo, hi, true); };
  std::vector<OpCase> cases;

  cases.push_back({"add", {"a", "b"}, {n({2, 3}), n({2, 3})}, [](auto& in) { return add(in[0], in[1]); }});
  cases.push_back({"sub", {"a", "b"}, {n({2, 3}), n({2, 3})}, [](auto& in) { return sub(in[0], in[1]); }});
  cases.push_back({"mul", {"a", "b"}, {n({2, 3}), n({2, 3})}, [](auto& in) { return mul(in[0], in[1]); }});
  cases.push_back({"scale", {"x"}, {n({5})}, [](auto& in) { return scale(in[0], -1.7); }});
  cases.push_back({"one_minus", {"x"}, {n({5})}, [](auto& in) { return one_minus(in[0]); }});
  cases.push_back({"sigmoid", {"x"}, {n({7})}, [](auto& in) { return sigmoid(in[0]); }});
  cases.push_back({"tanh", {"x"}, {n({7})}, [](auto& in) { return tanh(in[0]); }});
  cases.push_back({"relu", {"x"}, {n({9})}, [](auto& in) { return relu(in[0]); }});
  cases.push_back({"sum", {"x"}, {n({2, 4})}, [](auto& in) { return sum(in[0]); }});
  cases.push_back({"mean", {"x"}, {n({2, 4})}, [](auto& in) { return mean(in[0]); }});
  cases.push_back({"reshape", {"x"}, {n({2, 6})}, [](auto& in) { return in[0].reshape({3, 4}); }});
  cases.push_back({"gate_channels", {"map", "x"}, {n({2, 1, 3, 3}), n({2, 3, 3, 3})},
                   [](auto& in) { return gate_channels(in[0], in[1]); }});
  cases.push_back({"conv2d", {"input", "kernel", "bias"}, {n({2, 2, 5, 5}), n({3, 2, 3, 3}), n({3})},
                   [](auto& in) { return conv2d(in[0], conv_params(in, 1, 2, 1, 1, 1)); }});
  cases.push_back({"conv2d_dilated", {"input", "kernel", "bias"}, {n({1, 2, 6, 6}), n({2, 2, 3, 3}), n({2})},
                   [](auto& in) { return conv2d(in[0], conv_params(in, 1, 2, 1, 2, 2)); }});
  cases.push_back({"conv2d_strided", {"input", "kernel", "bias"}, {n({1, 2, 7, 7}), n({2, 2, 3, 3}), n({2})},
                   [](auto& in) { return conv2d(in[0], conv_params(in, 1, 2, 2, 0, 1)); }});
  cases.push_back({"conv2d_pointwise", {"input", "kernel", "bias"}, {n({2, 3, 4, 4}), n({2, 3, 1, 1}), n({2})},
                   [](auto& in) { return conv2d(in[0], conv_params(in, 1, 2, 1, 0, 1)); }});
  cases.push_back({"max_pool2x2", {"x"}, {n({2, 2, 4, 6})}, [](auto& in) { return max_pool2x2(in[0]); }});
  cases.push_back({"adaptive_avg_pool", {"x"}, {n({1, 2, 7, 5})},
                   [](auto& in) { return adaptive_avg_pool(in[0], 3); }});
  cases.push_back({"bilinear_resize", {"x"}, {n({1, 2, 3, 4})},
                   [](auto& in) { return bilinear_resize(in[0], 5, 7); }});
  cases.push_back({"pyramid_pool", {"x"}, {n({1, 2, 8, 8})}, [](auto& in) { return pyramid_pool(in[0], 4); }});
  cases.push_back({"concat_channels", {"a", "b"}, {n({2, 1, 3, 3}), n({2, 2, 3, 3})},
                   [](auto& in) { return concat_channels({in[0], in[1]}); }});
  cases.push_back({"dynamic_conv", {"input", "kernel"}, {n({2, 3, 3, 3}), n({2, 3, 3, 1, 1})},
                   [](auto& in) { return dynamic_conv(in[0], in[1]); }});
  cases.push_back({"global_avg_pool", {"x"}, {n({2, 3, 3, 4})}, [](auto& in) { return global_avg_pool(in[0]); }});
  cases.push_back({"linear", {"x", "weight", "bias"}, {n({2, 4}), n({3, 4}), n({3})},
                   [](auto& in) { return linear(in[0], in[1], in[2]); }});

  const Tensor target = uniform(rng, {2, 1, 3, 3}, 0.0, 1.0, false);
  cases.push_back({"mse_loss", {"pred"}, {u({2, 1, 3, 3}, 0.0, 1.0)},
                   [target](auto& in) { return mse_loss(in[0], target); }});
  cases.push_back({"sse_loss", {"pred"}, {u({2, 1, 3, 3}, 0.0, 1.0)},
                   [target](auto& in) { return sse_loss(in[0], target); }});

  const std::size_t c = 2;
  auto gru = make_conv_gru(rng, c);
  cases.push_back({"conv_gru_step",
                   {"state", "input", "reset.kernel", "update.kernel", "candidate.kernel", "candidate.bias"},
                   {n({1, c, 4, 4}), n({1, c, 4, 4}), gru.reset.kernel, gru.update.kernel,
                    gru.candidate.kernel, n({c})},
                   [gru](auto& in) {
                     auto p = gru;
                     p.reset.kernel = in[2];
                     p.update.kernel = in[3];
                     p.candidate.kernel = in[4];
                     p.candidate.bias = in[5];
                     return conv_gru_step(in[0], in[1], p);
                   }});
  return cases;
}

GradCheckRow check_input(const OpCase& op, std::size_t which, Rng& rng, double eps) {
  const auto probe = op.fn(op.inputs);
  const Tensor weights = uniform(rng, probe.shape(), -1.0, 1.0, false);
  auto loss_with = [&](const Tensor& x) {
    auto in = op.inputs;
    in[which] = x;
    return sum(mul(op.fn(in), weights));
  };

  const auto grads = backward(loss_with(op.inputs[which]));
  const auto analytic = grads[op.inputs[which]];
  const auto numeric = finite_diff_grad(loss_with, op.inputs[which], eps);

  GradCheckRow row{op.name + "." + op.input_names[which], 0.0, 0.0, -1.0};
  for (std::size_t i = 0; i < numeric.numel(); ++i) {
    const double a = analytic.data()[i];
    const double f = numeric.data()[i];
    const double e = rel_error(a, f);
    if (!(e <= row.rel_error)) row = {row.name, a, f, e};
  }
  return row;
}

}  // namespace

GradCheckReport grad_check_ops(const GradCheckOptions& options) {
  Rng rng(options.seed);
  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (const auto& op : op_cases(rng)) {
    for (std::size_t i = 0; i < op.inputs.size(); ++i) {
      report.rows.push_back(check_input(op, i, rng, options.eps));
    }
  }
  return report;
}

GradCheckReport grad_check_model(const GradCheckOptions& options) {
  auto config = ModelConfig::make(options.scales, options.iterations, options.width_multiplier);
  config.graph.lambda = options.lambda;
  HyGnnModel model(config, options.seed);

  Rng rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  if (options.bias_stddev > 0.0) {
    // Zero biases on a 2x2 grid starve the dilated back-end; move to a generic point.
    std::normal_distribution<double> dist(0.0, options.bias_stddev);
    for (const auto& p : model.parameters()) {
      if (!p.name.ends_with(".bias")) continue;
      Tensor t = p.tensor;
      for (auto& v : t.mutable_data()) v += dist(rng);
    }
  }
  const std::size_t s = options.image_size;
  const std::size_t g = s / 8;
  const Tensor image = uniform(rng, {1, 3, s, s}, 0.0, 1.0, false);
  const Tensor d_target = uniform(rng, {1, 1, g, g}, 0.0, 1.0, false);
  const Tensor l_target = uniform(rng, {1, 1, g, g}, 0.0, 1.0, false);
  auto loss = [&] {
    const auto out = model.forward(image);
    return add(mse_loss(out.density, d_target), scale(mse_loss(out.localization, l_target), options.lambda));
  };

  const auto grads = backward(loss());
  const auto& params = model.parameters();

  GradCheckReport report;
  report.tolerance = options.tolerance;
  std::uniform_int_distribution<std::size_t> pick_param(0, params.size() - 1);
  for (std::size_t k = 0; k < options.samples; ++k) {
    const auto& p = params[pick_param(rng)];
    std::uniform_int_distribution<std::size_t> pick_elem(0, p.tensor.numel() - 1);
    const std::size_t i = pick_elem(rng);

    Tensor t = p.tensor;
    auto data = t.mutable_data();
    const double original = data[i];
    data[i] = original + options.eps;
    const double up = loss().item();
    data[i] = original - options.eps;
    const double down = loss().item();
    data[i] = original;

    const double numeric = (up - down) / (2.0 * options.eps);
    const double analytic = grads[p.tensor].data()[i];
    report.rows.push_back({p.name + "[" + std::to_string(i) + "]", analytic, numeric,
                           rel_error(analytic, numeric)});
  }
  return report;
}

GradCheckReport grad_check(const GradCheckOptions& options) {
  auto report = grad_check_ops(options);
  auto model = grad_check_model(options);
  report.rows.insert(report.rows.end(), model.rows.begin(), model.rows.end());
  return report;
}

void print_report(std::ostream& out, const GradCheckReport& report) {
  const auto flags = out.flags();
  out << std::left << std::setw(48) << "check" << std::right << std::setw(16) << "analytic"
      << std::setw(16) << "numeric" << std::setw(12) << "rel_error" << '\n';
  for (const auto& r : report.rows) {
    out << std::left << std::setw(48) << r.name << std::right << std::scientific << std::setprecision(6)
        << std::setw(16) << r.analytic << std::setw(16) << r.numeric << std::setprecision(2)
        << std::setw(12) << r.rel_error << '\n';
  }
  out << std::scientific << std::setprecision(3) << "max relative error " << report.max_rel_error()
      << " (tolerance " << report.tolerance << "): " << (report.passed() ? "PASS" : "FAIL") << '\n';
  out.flags(flags);
}

}  // namespace hygnn
