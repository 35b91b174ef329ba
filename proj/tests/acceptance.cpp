// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fusionret/cli.hpp"
#include "fusionret/ensemble.hpp"
#include "fusionret/error.hpp"
#include "fusionret/eval.hpp"
#include "fusionret/feature_selection.hpp"
#include "fusionret/io.hpp"
#include "fusionret/lhp.hpp"
#include "fusionret/losses.hpp"
#include "fusionret/synth.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace fusionret;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

int failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.ok = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (o.ok && secs > budget_s) {
    o.ok = false;
    o.detail = "over time budget of " + std::to_string(budget_s) + " s";
  }
  char timing[64];
  std::snprintf(timing, sizeof timing, "%.3f s", secs);
  std::cout << (o.ok ? "PASS " : "FAIL ") << name << " [" << timing << "]";
  if (!o.detail.empty()) std::cout << " " << o.detail;
  std::cout << std::endl;
  if (!o.ok) ++failures;
}

bool near(double x, double want, double tol = 1e-8) { return std::abs(x - want) <= tol; }

Matrix random_distributions(Rng& rng, std::size_t rows, std::size_t vocab) {
  Matrix m(rows, vocab);
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (double& v : m.row(r)) sum += (v = std::exp(rng.uniform(-2.0, 2.0)));
    for (double& v : m.row(r)) v /= sum;
  }
  return m;
}

Outcome loss_kernels() {
  Outcome o;
  o.require(near(itc_loss(ScoreMatrix(Matrix{{0.42}}), 1.0), 0.0), "itc singleton");
  o.require(near(itc_loss(ScoreMatrix(Matrix{{1, 0}, {0, 1}}), 1.0), 0.31326168751822283), "itc 2x2 identity");
  o.require(itc_loss(ScoreMatrix(Matrix{{100, 0}, {0, 100}}), 1.0) <= 1e-10, "itc saturated");
  o.require(itm_loss(ItmBatch({1}, {1.0})) <= 1e-11, "itm perfect");
  o.require(near(itm_loss(ItmBatch({1}, {0.5})), 0.69314718055994531), "itm half");
  o.require(near(itm_loss(ItmBatch({1, 0}, {0.9, 0.2})), 0.16425203348601803), "itm pair");
  o.require(near(mlm_loss(MlmBatch(Matrix{{0, 1, 0}}, {1})), 0.0), "mlm perfect");
  o.require(near(mlm_loss(MlmBatch(Matrix{{0.25, 0.25, 0.25, 0.25}}, {3})), 1.3862943611198906), "mlm uniform");
  o.require(near(mlm_loss(MlmBatch(Matrix{{0.5, 0.5}, {0.75, 0.25}}, {0, 1})), 1.0397207708399179), "mlm two");
  const ImageTensor img({2, 2}, {0.1, 0.2, 0.3, 0.4});
  o.require(near(mim_loss(img, img, MaskSpec::all(4)), 0.0), "mim perfect");
  o.require(near(mim_loss(ImageTensor({2, 2}, {0.6, 0.7, 0.8, 0.9}), img, MaskSpec::all(4)), 0.5), "mim half");
  o.require(near(mim_loss(ImageTensor({2, 2, 2}, {0, 0, 0, 0, 1, 1, 1, 1}),
                          ImageTensor({2, 2, 2}, std::vector<double>(8, 0.0)), MaskSpec::all(8)),
                 0.5),
            "mim two images");
  o.require(total_loss(0, 0, 0, 0).total == 0.0, "total zero");
  o.require(near(total_loss(0.5, 0, 0, 2.0).total, 0.7712), "total mixed");

  Rng rng(20240601);
  o.require(finite_diff_grad_check(ItcInput{ScoreMatrix(oracle::random_matrix(rng, 4, 4)), 0.07}, 1e-6) < 1e-4,
            "itc 4x4 gradcheck");
  o.require(finite_diff_grad_check(ItmBatch({1, 0}, {0.9, 0.2}), 1e-6) < 1e-4, "itm pair gradcheck");

  double worst_itc = 0, worst_itm = 0, worst_mlm = 0, worst_mim = 0;
  for (int it = 0; it < 100; ++it) {
    const std::size_t n = 2 + rng.uniform_index(7);
    worst_itc = std::max(worst_itc, finite_diff_grad_check(
                                        ItcInput{ScoreMatrix(oracle::random_matrix(rng, n, n)), rng.uniform(0.05, 1.0)},
                                        1e-6));
    std::vector<std::uint8_t> labels(n);
    std::vector<double> probs(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = rng.bernoulli(0.5) ? 1 : 0;
      probs[i] = rng.uniform(0.01, 0.99);
    }
    worst_itm = std::max(worst_itm, finite_diff_grad_check(ItmBatch(labels, probs), 1e-6));
    const std::size_t vocab = 2 + rng.uniform_index(30);
    std::vector<std::size_t> targets(n);
    for (auto& t : targets) t = rng.uniform_index(vocab);
    worst_mlm =
        std::max(worst_mlm, finite_diff_grad_check(MlmBatch(random_distributions(rng, n, vocab), targets), 1e-6));

    std::vector<double> rec(2 * n), orig(2 * n);
    std::vector<std::uint8_t> flags(2 * n);
    for (std::size_t i = 0; i < rec.size(); ++i) {
      rec[i] = rng.uniform();
      orig[i] = rng.uniform();
      flags[i] = rng.bernoulli(0.7) ? 1 : 0;
    }
    flags[0] = 1;
    worst_mim = std::max(worst_mim, finite_diff_grad_check(MimInput{ImageTensor({2, n}, rec), ImageTensor({2, n}, orig),
                                                                    MaskSpec(flags), it % 2 == 0},
                                                           1e-6));
  }
  o.require(worst_itc < 1e-4, "itc gradcheck " + std::to_string(worst_itc));
  o.require(worst_itm < 1e-4, "itm gradcheck " + std::to_string(worst_itm));
  o.require(worst_mlm < 1e-4, "mlm gradcheck " + std::to_string(worst_mlm));
  o.require(worst_mim < 1e-4, "mim gradcheck " + std::to_string(worst_mim));
  if (o.ok) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "max rel err itc=%.2e itm=%.2e mlm=%.2e mim=%.2e", worst_itc, worst_itm,
                  worst_mlm, worst_mim);
    o.detail = buf;
  }
  return o;
}

Outcome composition() {
  Outcome o;
  const LossReport r = total_loss(1, 1, 1, 1, 0.1356);
  o.require(r.total == 3.1356, "total(1,1,1,1) != 3.1356");
  o.require(total_loss(1, 1, 1, 1).alpha == 0.1356, "default alpha");
  return o;
}

Outcome lhp_sampler() {
  Outcome o;
  const auto a = sample_decisions(12345, 100000);
  std::size_t local = 0;
  for (const auto& d : a) local += d.branch == LhpBranch::Local;
  const double p = static_cast<double>(local) / static_cast<double>(a.size());
  o.require(std::abs(p - 0.5) < 0.01, "P(Local) = " + std::to_string(p));
  const auto b = sample_decisions(12345, 100000);
  bool identical = a.size() == b.size();
  for (std::size_t i = 0; identical && i < a.size(); ++i) {
    identical = std::memcmp(&a[i].sampled_value, &b[i].sampled_value, sizeof(double)) == 0 &&
                a[i].branch == b[i].branch;
  }
  o.require(identical, "same seed produced different sequences");
  if (o.ok) o.detail = "P(Local)=" + std::to_string(p);
  return o;
}

Outcome selection_oracle() {
  Outcome o;
  Rng rng(777);
  Matrix bank(50, 4);
  for (double& v : bank.data()) v = rng.normal();
  const EmbeddingMatrix features(bank);
  for (int it = 0; it < 1000 && o.ok; ++it) {
    const Matrix g = oracle::random_matrix(rng, 20, 50, it % 2 == 0);
    const std::size_t k = 1 + rng.uniform_index(50);
    const auto sel = select_topk_features(features, ScoreMatrix(g), k);
    const auto want = oracle::topk_indices(g, k);
    for (std::size_t q = 0; q < 20 && o.ok; ++q) {
      const auto c = sel.candidates(q);
      for (std::size_t r = 0; r < k; ++r) {
        if (c[r].gallery_index != want[q][r]) {
          o.require(false, "mismatch on instance " + std::to_string(it));
          break;
        }
      }
    }
  }
  return o;
}

Outcome first_iteration_invariance() {
  Outcome o;
  Rng rng(31337);
  for (int it = 0; it < 100 && o.ok; ++it) {
    const std::size_t n = 5 + rng.uniform_index(20);
    const ScoreMatrix t(oracle::random_matrix(rng, n, n, it % 2 == 0));
    const ScoreMatrix zero(Matrix(n, n, 0.0));
    const auto ref = topk_rows(fuse(zero, t, 0.0), n).indices;
    for (double w : {0.5, 0.8, 0.925}) {
      o.require(topk_rows(fuse(zero, t, w), n).indices == ref, "ranking changed at instance " + std::to_string(it));
    }
  }
  return o;
}

Outcome skip_monotonicity() {
  Outcome o;
  Rng rng(4242);
  const WeightGrid grid({0.0, 0.5, 0.8, 0.9, 1.0});
  for (int it = 0; it < 100 && o.ok; ++it) {
    const std::size_t n = 8 + rng.uniform_index(12);
    std::vector<ScoreMatrix> models;
    for (int m = 0; m < 3; ++m) models.emplace_back(oracle::random_matrix(rng, n, n, it % 3 == 0));
    const auto res = iterative_ensemble(models, GroundTruth::identity(n), grid,
                                        MetricKind::recall_at(1 + rng.uniform_index(3)));
    for (std::size_t s = 1; s < res.trace.steps.size(); ++s) {
      o.require(res.trace.steps[s].tuning_metric_value >= res.trace.steps[s - 1].tuning_metric_value,
                "metric decreased at instance " + std::to_string(it));
    }
  }
  return o;
}

Outcome complementary_gain() {
  Outcome o;
  const ScoreMatrix left(fixtures::complementary_left());
  const ScoreMatrix right(fixtures::complementary_right());
  const GroundTruth gt = GroundTruth::identity(4);
  o.require(recall_at_k(left, gt, 1) == 0.5, "left alone");
  o.require(recall_at_k(right, gt, 1) == 0.5, "right alone");
  const std::vector<ScoreMatrix> models{left, right};
  const auto a = iterative_ensemble(models, gt, WeightGrid::standard(), MetricKind::recall_at(1));
  const auto b = iterative_ensemble(models, gt, WeightGrid::standard(), MetricKind::recall_at(1));
  o.require(a.trace.final_metrics.r_at.at(1) == 1.0, "fused R@1 below 1");
  o.require(a.fused == b.fused && a.trace.steps[1].chosen_w == b.trace.steps[1].chosen_w, "nondeterministic");
  if (o.ok) o.detail = "w=" + std::to_string(a.trace.steps[1].chosen_w);
  return o;
}

Outcome independence_arithmetic() {
  Outcome o;
  SynthConfig cfg;
  cfg.n_items = 2000;
  cfg.seed = 2024;
  cfg.n_models = 2;
  cfg.model_skill = {0.7, 0.7};
  const auto models = gen_model_scores(cfg);
  const GroundTruth gt = GroundTruth::identity(cfg.n_items);
  std::size_t either = 0;
  for (std::size_t q = 0; q < cfg.n_items; ++q) {
    const bool a = first_relevant_rank(models[0].row(q), gt.relevant(q)) == 0;
    const bool b = first_relevant_rank(models[1].row(q), gt.relevant(q)) == 0;
    either += (a || b) ? 1 : 0;
  }
  const double oracle_r1 = static_cast<double>(either) / static_cast<double>(cfg.n_items);
  const auto res = iterative_ensemble(models, gt, WeightGrid::standard(), MetricKind::recall_at(1));
  const double fused = res.trace.final_metrics.r_at.at(1);
  o.require(std::abs(fused - oracle_r1) <= 0.02,
            "fused " + std::to_string(fused) + " vs oracle " + std::to_string(oracle_r1));
  o.require(std::abs(oracle_r1 - 0.91) <= 0.02, "oracle " + std::to_string(oracle_r1) + " far from 0.91");
  if (o.ok) o.detail = "fused=" + std::to_string(fused) + " oracle=" + std::to_string(oracle_r1);
  return o;
}

Outcome recall_oracle() {
  Outcome o;
  Rng rng(55);
  const std::vector<std::size_t> ks{1, 2, 5, 10, 25, 50};
  for (int it = 0; it < 1000 && o.ok; ++it) {
    const Matrix m = oracle::random_matrix(rng, 50, 50, it % 2 == 0);
    std::vector<std::vector<std::size_t>> rel(50);
    for (auto& r : rel) {
      const std::size_t c = 1 + rng.uniform_index(3);
      for (std::size_t i = 0; i < c; ++i) r.push_back(rng.uniform_index(50));
    }
    const auto rep = metrics_report(ScoreMatrix(m), GroundTruth(rel, 50), ks);
    double prev = 0.0;
    for (std::size_t k : ks) {
      const double got = rep.r_at.at(k);
      o.require(got == oracle::recall(m, rel, k), "mismatch at instance " + std::to_string(it));
      o.require(got >= prev, "not monotone at instance " + std::to_string(it));
      prev = got;
    }
  }
  return o;
}

template <class Fn>
std::string error_message(Fn&& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.what();
  }
  return {};
}

Outcome io_round_trip() {
  Outcome o;
  Rng rng(99);
  for (int it = 0; it < 100 && o.ok; ++it) {
    Matrix m(1 + rng.uniform_index(30), 1 + rng.uniform_index(30));
    for (double& v : m.data()) v = rng.normal() * std::pow(10.0, rng.uniform(-100.0, 100.0));
    const std::string bytes = io::serialize_npy(m);
    const Matrix back = io::parse_npy(bytes);
    o.require(back.rows() == m.rows() && back.cols() == m.cols() &&
                  std::memcmp(back.data().data(), m.data().data(), m.data().size() * sizeof(double)) == 0,
              "payload differs at instance " + std::to_string(it));
    o.require(io::serialize_npy(back) == bytes, "re-serialization differs at instance " + std::to_string(it));
  }

  const auto dir = oracle::temp_dir("acceptance_io");
  const Matrix file_m{{1.5, -2.25}, {1e-300, 7}};
  io::write_matrix(file_m, dir / "m.npy");
  o.require(io::load_matrix(dir / "m.npy") == file_m, "file round trip");

  const std::string good = io::serialize_npy(Matrix{{1, 2}});
  std::string bad = good;
  bad[0] = 'X';
  o.require(error_message([&] { io::parse_npy(bad); }).find("byte 0") != std::string::npos, "bad magic offset");
  bad = good;
  bad[6] = 3;
  o.require(error_message([&] { io::parse_npy(bad); }).find("byte 6") != std::string::npos, "bad version offset");
  bad = good;
  const std::size_t fo = bad.find("False");
  bad.replace(fo, 5, "True ");
  const std::string msg = error_message([&] { io::parse_npy(bad); });
  o.require(msg.find("fortran_order") != std::string::npos && msg.find("byte ") != std::string::npos,
            "fortran_order not rejected with position");
  bad = good;
  bad[bad.find("<f8") + 1] = 'i';
  o.require(error_message([&] { io::parse_npy(bad); }).find("byte ") != std::string::npos, "dtype not rejected");
  o.require(error_message([&] { io::parse_csv("1,2\n3\n"); }).find("line 2") != std::string::npos,
            "ragged csv line");
  return o;
}

struct PipelineOutput {
  std::string eval_report;
  std::string ensemble_report;
  std::string fused_bytes;
  int code = 0;
};

PipelineOutput run_pipeline(const fs::path& dir) {
  PipelineOutput p;
  std::ostringstream out, err;
  const auto run = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "fusionret");
    out.str("");
    const int c = cli::run_cli(args, out, err);
    if (c != 0 && p.code == 0) p.code = c;
    return out.str();
  };
  run({"synth", "--items", "200", "--dim", "16", "--noise", "0.8", "--seed", "7", "--skill", "0.5,0.4", "--out-dir",
       dir.string()});
  run({"sim", "--queries", (dir / "text.npy").string(), "--gallery", (dir / "image.npy").string(), "--out",
       (dir / "sim.npy").string()});

  io::Manifest manifest = io::load_manifest(dir / "manifest.json");
  manifest.models.insert(manifest.models.begin(), {"cosine", "sim.npy"});
  for (auto& m : manifest.models) m.path = m.path.filename();
  io::write_manifest(manifest, dir / "ensemble.json");

  p.ensemble_report = run({"ensemble", "--manifest", (dir / "ensemble.json").string(), "--out",
                           (dir / "fused.npy").string()});
  p.eval_report = run({"eval", "--scores", (dir / "fused.npy").string(), "--gt", (dir / "gt.json").string(), "--k",
                       "1,5,10"});
  p.fused_bytes = io::read_file(dir / "fused.npy");
  if (p.code != 0) std::cerr << err.str();
  return p;
}

// Values recorded from the first run of this pipeline.
constexpr const char* kPinnedEval = "n_queries=200\nR@1=0.8150\nR@5=0.9100\nR@10=0.9550\n";
constexpr const char* kPinnedTrace =
    "models=3\nmetric=R@1\nnormalize=true\n"
    "step.0.model=cosine\nstep.0.w=0\nstep.0.metric=0.4350\nstep.1.model=model_0\nstep.1.w=0.8\nstep.1.metric=0.6350\nstep.2.model=model_1\nstep.2.w=0.8\nstep.2.metric=0.8150\n"
    "final.n_queries=200\nfinal.R@1=0.8150\nfinal.R@5=0.9100\nfinal.R@10=0.9550\n";

Outcome end_to_end() {
  Outcome o;
  const auto a = run_pipeline(oracle::temp_dir("acceptance_e2e_a"));
  const auto b = run_pipeline(oracle::temp_dir("acceptance_e2e_b"));
  o.require(a.code == 0 && b.code == 0, "pipeline exit code");
  o.require(a.fused_bytes == b.fused_bytes, "fused matrix bytes differ between runs");
  o.require(a.eval_report == b.eval_report && a.ensemble_report == b.ensemble_report, "reports differ");
  o.require(a.eval_report == kPinnedEval, "eval report differs from pinned:\n" + a.eval_report);
  o.require(a.ensemble_report == kPinnedTrace, "trace differs from pinned:\n" + a.ensemble_report);
  return o;
}

}  // namespace

int main() {
  criterion("loss kernels: examples within 1e-8, gradient checks < 1e-4 on 100 instances", 10.0, loss_kernels);
  criterion("loss composition: total(1,1,1,1) == 3.1356 exactly", 1.0, composition);
  criterion("local/global sampler: fair over 1e5 draws, reproducible by seed", 1.0, lhp_sampler);
  criterion("top-k selection equals full-sort oracle on 1000 20x50 instances", 5.0, selection_oracle);
  criterion("ensemble first step invariant to w with zero start (100 instances)", 5.0, first_iteration_invariance);
  criterion("ensemble tuning metric non-decreasing with 1 in grid (100 3-model instances)", 10.0, skip_monotonicity);
  criterion("complementary 4x4 models fuse to R@1 = 1.0 > 0.5", 1.0, complementary_gain);
  criterion("two skill-0.7 models over 2000 queries fuse within 0.02 of oracle", 30.0, independence_arithmetic);
  criterion("recall matches full-sort oracle on 1000 50x50 instances, monotone in k", 10.0, recall_oracle);
  criterion("array round trip byte exact; malformed headers rejected with positions", 5.0, io_round_trip);
  criterion("synth -> sim -> ensemble -> eval reproduces pinned metrics byte for byte", 30.0, end_to_end);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
