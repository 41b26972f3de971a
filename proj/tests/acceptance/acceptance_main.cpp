// Property-based acceptance run. One PASS/FAIL line per criterion; criterion 7
// is reported but never fails the run.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "graph_fixtures.hpp"
#include "graph_oracle.hpp"
#include "hygnn/checkpoint.hpp"
#include "hygnn/data.hpp"
#include "hygnn/gradcheck.hpp"
#include "hygnn/graph.hpp"
#include "hygnn/model.hpp"
#include "hygnn/train.hpp"

using namespace hygnn;
using namespace fixtures;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const auto ops = grad_check_ops();
  const auto model = grad_check_model(GradCheckOptions{});
  const double secs = seconds_since(t0);
  const double worst = std::max(ops.max_rel_error(), model.max_rel_error());
  const bool ok = ops.passed() && model.passed() && secs < 120.0;
  return {ok, fmt("%zu op rows, %zu model rows, max rel err %.3g (tol 1e-4), %.1f s",
                  ops.rows.size(), model.rows.size(), worst, secs)};
}

std::set<std::string> parameter_names(const ModelConfig& cfg) {
  const HyGnnModel model(cfg, 1);
  std::set<std::string> out;
  for (const auto& p : model.parameters()) out.insert(p.name);
  return out;
}

std::size_t count_with(const std::set<std::string>& names, const std::string& part) {
  std::size_t c = 0;
  for (const auto& n : names) c += n.find(part) != std::string::npos;
  return c;
}

bool states_identical(const std::vector<NodeState>& a, const std::vector<NodeState>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].domain != b[i].domain || a[i].scale != b[i].scale || !same_bits(a[i].h, b[i].h)) return false;
  return true;
}

Outcome graph_identities() {
  std::mt19937_64 rng(21);
  std::vector<std::string> failures;

  for (std::size_t n : {1, 2, 3}) {
    auto cfg = small_config(n, 0);
    auto states = random_states(n, {2, 2, 4, 4}, rng);
    if (!states_identical(propagate(states, cfg, random_weights(cfg, 22)), states))
      failures.push_back(fmt("K=0 N=%zu", n));
  }
  for (std::size_t k : {1, 3, 5}) {
    auto cfg = small_config(1, k);
    cfg.enable_cross_domain = false;
    cfg.enable_adapter = false;
    auto states = random_states(1, {1, 2, 4, 4}, rng);
    if (!states_identical(propagate(states, cfg, random_weights(cfg, 23)), states))
      failures.push_back(fmt("single-task N=1 K=%zu", k));
  }

  const auto full = parameter_names(ModelConfig::make(3, 1));
  auto no_adapter_cfg = ModelConfig::make(3, 1);
  no_adapter_cfg.graph.enable_adapter = false;
  const auto no_adapter = parameter_names(no_adapter_cfg);
  auto single_cfg = ModelConfig::make(3, 1);
  single_cfg.graph.enable_cross_domain = false;
  single_cfg.graph.enable_adapter = false;
  const auto single = parameter_names(single_cfg);

  if (count_with(full, ".phi.") == 0 || count_with(full, ".eta.") == 0 || count_with(full, "cross_domain_gru") == 0)
    failures.push_back("full model lacks adapter or cross-domain parameters");
  if (count_with(no_adapter, ".phi.") + count_with(no_adapter, ".eta.") != 0 ||
      count_with(no_adapter, "domain_edge") == 0 || count_with(no_adapter, "cross_domain_gru") == 0)
    failures.push_back("w/o adapter parameter set");
  if (count_with(single, "_to_") + count_with(single, "cross_domain_gru") != 0 ||
      count_with(single, "cross_scale_gru") == 0)
    failures.push_back("single-task parameter set");
  // Removing a component must not touch anything else.
  for (const auto& n : single)
    if (!full.count(n)) failures.push_back("single-task adds " + n);
  for (const auto& n : no_adapter)
    if (!full.count(n)) failures.push_back("w/o adapter adds " + n);

  std::string detail = fmt("full %zu / w/o adapter %zu / single-task %zu parameter tensors", full.size(),
                           no_adapter.size(), single.size());
  for (const auto& f : failures) detail += "; failed: " + f;
  return {failures.empty(), detail};
}

Outcome relation_oracles() {
  std::mt19937_64 rng(31);
  const Shape shape{1, 2, 4, 4};
  double worst = 0.0;
  bool fixed_points = true;
  for (int trial = 0; trial < 5; ++trial) {
    auto cfg = small_config(2, 1);
    auto w = random_weights(cfg, 40 + trial);
    auto a = oracle::random_tensor(rng, shape);
    auto b = oracle::random_tensor(rng, shape);
    const oracle::Map4 ma(a), mb(b);
    NodeState ca{Domain::counting, 0, a}, cb{Domain::counting, 1, b};
    NodeState la{Domain::localization, 0, b};

    const auto& dw = w.domains[0];
    auto se = cross_scale_edge_embed(ca, cb, dw.scale_edge);
    worst = std::max(worst, oracle::max_abs_diff(se.e, oracle::scale_edge(ma, mb, dw.scale_edge)));
    auto sm = cross_scale_message(ca, se, dw.scale_link);
    worst = std::max(worst, oracle::max_abs_diff(sm, oracle::scale_message(ma, oracle::Map4(se.e), dw.scale_link)));

    for (bool adapter : {true, false}) {
      const auto& dir = (*w.directions)[1];
      auto de = cross_domain_edge_embed(la, ca, dir, adapter);
      worst = std::max(worst, oracle::max_abs_diff(de.e, oracle::domain_edge(mb, ma, dir, adapter)));
      auto dm = cross_domain_message(la, ca, de, dir, adapter);
      worst = std::max(worst, oracle::max_abs_diff(dm, oracle::domain_message(mb, ma, oracle::Map4(de.e), dir, adapter)));
    }

    auto m1 = oracle::random_tensor(rng, shape);
    auto m2 = oracle::random_tensor(rng, shape);
    const auto& gru1 = *w.domains[1].cross_domain_gru;
    const auto& gru2 = w.domains[1].cross_scale_gru;
    auto q = node_update_two_stage(la, m1, m2, gru1, gru2);
    worst = std::max(worst, oracle::max_abs_diff(q.h, oracle::two_stage(mb, oracle::Map4(m1), oracle::Map4(m2), gru1, gru2)));

    // Zero-weight GRU: z = r = 1/2 and a zero candidate halve the state per stage.
    auto half = conv_gru_step(a, m1, zero_gru(2));
    auto quarter = node_update_two_stage(ca, m1, m2, zero_gru(2), zero_gru(2)).h;
    for (std::size_t i = 0; i < a.numel(); ++i) {
      fixed_points &= std::abs(half.data()[i] - 0.5 * a.data()[i]) < 1e-12;
      fixed_points &= std::abs(quarter.data()[i] - 0.25 * a.data()[i]) < 1e-12;
    }
  }
  return {worst < 1e-12 && fixed_points,
          fmt("max |impl - oracle| %.3g over 5 draws (tol 1e-12); zero-GRU fixed points %s", worst,
              fixed_points ? "hold" : "broken")};
}

Outcome gt_conservation() {
  SynthConfig cfg;
  cfg.height = 384;
  cfg.width = 384;
  cfg.margin = 128;
  cfg.count_min = 20;
  cfg.count_max = 200;
  double worst = 0.0;
  std::size_t flip_mismatches = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto scene = synth_scene(9000 + s, cfg);
    const auto density = generate_density_gt(scene);
    const double count = static_cast<double>(scene.count());
    worst = std::max(worst, std::abs(density.mass() - count) / count);

    const auto mirrored = flip_horizontal(scene);
    const auto flipped_gt = generate_density_gt(mirrored);
    const auto flipped_loc = generate_localization_gt(mirrored);
    if (!same_bits(flipped_gt.grid, flip_last_axis(density.grid)) ||
        !same_bits(flipped_loc.grid, flip_last_axis(generate_localization_gt(scene).grid)))
      ++flip_mismatches;
  }
  return {worst < 0.01 && flip_mismatches == 0,
          fmt("100 scenes 384x384: max relative mass error %.3g (tol 1e-2); flip mismatches %zu", worst,
              flip_mismatches)};
}

Outcome metric_oracle() {
  const double predicted[] = {10, 20}, truth[] = {12, 17};
  const auto r = compute_metrics(predicted, truth);
  const bool fixed = std::abs(r.mae - 2.5) < 1e-9 && std::abs(r.mse - 2.549509756796392) < 1e-9;
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<int> len(1, 64);
  std::uniform_real_distribution<double> count(0.0, 500.0);
  std::size_t violations = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> p(len(rng)), g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = count(rng);
      g[i] = std::round(count(rng));
    }
    const auto m = compute_metrics(p, g);
    violations += !(m.mae <= m.mse);
  }
  return {fixed && violations == 0,
          fmt("fixed example MAE %.12g MSE %.12g; MAE > MSE in %zu of 1000 vectors", r.mae, r.mse, violations)};
}

std::vector<Scene> synth_set(std::uint64_t first_seed, std::size_t n) {
  std::vector<Scene> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(synth_scene(first_seed + i));
  return out;
}

double mean_count(const std::vector<Scene>& scenes) {
  double s = 0.0;
  for (const auto& sc : scenes) s += static_cast<double>(sc.count());
  return s / static_cast<double>(scenes.size());
}

Outcome overfit(std::size_t steps) {
  TrainConfig c;
  c.scales = 3;
  c.mp_iterations = 2;
  c.width_multiplier = 0.125;
  c.batch = 8;
  c.crop = 64;
  c.lr = 1e-3;
  c.flip = false;
  c.seed = 61;
  c.iterations = steps;
  const auto scenes = synth_set(600, 8);
  const auto t0 = Clock::now();
  const auto result = train(c, scenes);
  const double secs = seconds_since(t0);
  const auto eval = evaluate(model_from_checkpoint(result.checkpoint), scenes);
  const double target = 0.1 * mean_count(scenes);
  return {eval.mae < target && secs < 600.0,
          fmt("%zu steps in %.0f s: train MAE %.4g vs 10%% of mean count %.4g; final loss %.3g", steps, secs,
              eval.mae, target, result.log.back().total)};
}

Outcome message_passing_benefit(std::size_t steps) {
  const auto train_set = synth_set(7000, 32);
  const auto held_out = synth_set(8000, 32);
  double sum_k3 = 0.0, sum_k0 = 0.0;
  std::string per_seed;
  for (std::uint64_t seed : {71, 72, 73}) {
    double mae[2];
    for (int which = 0; which < 2; ++which) {
      TrainConfig c;
      c.scales = 3;
      c.mp_iterations = which == 0 ? 3 : 0;
      c.batch = 8;
      c.crop = 64;
      c.lr = 1e-3;
      c.seed = seed;
      c.iterations = steps;
      const auto result = train(c, train_set);
      mae[which] = evaluate(model_from_checkpoint(result.checkpoint), held_out).mae;
    }
    sum_k3 += mae[0];
    sum_k0 += mae[1];
    per_seed += fmt(" seed %llu: K=3 %.3f, K=0 %.3f;", static_cast<unsigned long long>(seed), mae[0], mae[1]);
  }
  const double k3 = sum_k3 / 3.0, k0 = sum_k0 / 3.0;
  return {k3 <= k0, fmt("mean held-out MAE K=3 %.3f vs K=0 %.3f over 3 seeds, %zu steps each;%s", k3, k0, steps,
                        per_seed.c_str())};
}

Outcome determinism() {
  TrainConfig c;
  c.scales = 2;
  c.mp_iterations = 1;
  c.batch = 2;
  c.crop = 32;
  c.lr = 1e-3;
  c.seed = 81;
  const auto scenes = synth_set(800, 4);

  auto same_log = [](const std::vector<LossRecord>& a, const std::vector<LossRecord>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (std::memcmp(&a[i].total, &b[i].total, sizeof(double)) ||
          std::memcmp(&a[i].density, &b[i].density, sizeof(double)) ||
          std::memcmp(&a[i].localization, &b[i].localization, sizeof(double)))
        return false;
    return true;
  };

  Trainer a(c, scenes), b(c, scenes);
  const auto log_a = a.run(5);
  const bool same_seed = same_log(log_a, b.run(5)) && bitwise_equal(a.checkpoint(), b.checkpoint());

  const auto dir = std::filesystem::temp_directory_path() / "hygnn_acceptance_resume";
  std::filesystem::create_directories(dir);
  bool resume_ok = true;
  for (std::uint64_t split = 1; split < 5; ++split) {
    Trainer first(c, scenes);
    auto log = first.run(split);
    save_checkpoint(first.checkpoint(), dir / "mid.ckpt");
    Trainer resumed(load_checkpoint(dir / "mid.ckpt"), scenes);
    auto tail = resumed.run(5 - split);
    log.insert(log.end(), tail.begin(), tail.end());
    resume_ok &= same_log(log_a, log) && bitwise_equal(a.checkpoint(), resumed.checkpoint());
  }
  std::filesystem::remove_all(dir);
  return {same_seed && resume_ok, fmt("same-seed runs %s; resume at steps 1-4 %s uninterrupted 5-step run",
                                      same_seed ? "bitwise identical" : "DIFFER",
                                      resume_ok ? "bitwise equal to" : "DIFFERS from")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HyGNN acceptance criteria"};
  std::vector<int> only;
  std::size_t overfit_steps = 500, benefit_steps = 200;
  std::string report_path = "acceptance_report.txt";
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--overfit-steps", overfit_steps, "Training steps of criterion 6");
  app.add_option("--benefit-steps", benefit_steps, "Training steps per run of criterion 7");
  app.add_option("--report", report_path, "Also write the verdict lines here (empty disables)");
  CLI11_PARSE(app, argc, argv);
  std::FILE* report = report_path.empty() ? nullptr : std::fopen(report_path.c_str(), "w");

  struct Criterion {
    int id;
    const char* name;
    bool soft;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient suite", false, gradient_suite},
      {2, "graph identities and ablations", false, graph_identities},
      {3, "relation oracles", false, relation_oracles},
      {4, "ground-truth conservation", false, gt_conservation},
      {5, "metric oracle", false, metric_oracle},
      {6, "overfit smoke test", false, [&] { return overfit(overfit_steps); }},
      {7, "message-passing benefit (soft)", true, [&] { return message_passing_benefit(benefit_steps); }},
      {8, "determinism and resume", false, determinism},
  };

  int hard_failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const char* verdict = o.pass ? "PASS" : (c.soft ? "FAIL (soft, not counted)" : "FAIL");
    for (std::FILE* out : {stdout, report}) {
      if (!out) continue;
      std::fprintf(out, "[%s] %d %s: %s\n", verdict, c.id, c.name, o.detail.c_str());
      std::fflush(out);
    }
    if (!o.pass && !c.soft) ++hard_failures;
  }
  if (report) std::fclose(report);
  return hard_failures == 0 ? 0 : 1;
}
