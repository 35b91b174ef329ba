#include "fusionret/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>

#include <CLI11.hpp>

#include "fusionret/ensemble.hpp"
#include "fusionret/error.hpp"
#include "fusionret/eval.hpp"
#include "fusionret/feature_selection.hpp"
#include "fusionret/io.hpp"
#include "fusionret/lhp.hpp"
#include "fusionret/losses.hpp"
#include "fusionret/matrix.hpp"
#include "fusionret/rng.hpp"
#include "fusionret/synth.hpp"

namespace fusionret::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    std::string field = text.substr(start, comma - start);
    field.erase(0, field.find_first_not_of(" \t"));
    field.erase(field.find_last_not_of(" \t") + 1);
    T v{};
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
      throw UsageError(std::string("cannot parse ") + what + " list entry '" + field + "'");
    }
    out.push_back(v);
    start = comma + 1;
  }
  return out;
}

std::string format_metrics(const RetrievalMetrics& m, const std::vector<std::size_t>& labels,
                           const std::vector<std::size_t>& effective, const std::string& prefix) {
  std::string s = prefix + "n_queries=" + std::to_string(m.n_queries) + "\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    s += prefix + "R@" + std::to_string(labels[i]) + "=" + fixed4(m.r_at.at(effective[i])) + "\n";
  }
  return s;
}

// Clips each k to the gallery size, warning once per clipped value.
std::vector<std::size_t> clip_ks(const std::vector<std::size_t>& ks, std::size_t gallery,
                                 std::ostream& err) {
  std::vector<std::size_t> out;
  for (std::size_t k : ks) {
    if (k == 0) throw UsageError("k values must be positive");
    if (k > gallery) {
      err << "warning: k=" << k << " exceeds gallery size " << gallery << "; clipped to " << gallery
          << "\n";
    }
    out.push_back(std::min(k, gallery));
  }
  return out;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) out << text;
  else io::write_file(path, text);
}

// ---------------------------------------------------------------- sim

struct SimArgs {
  std::string queries, gallery, out;
};

int cmd_sim(const SimArgs& a, std::ostream& out) {
  const EmbeddingMatrix q(io::load_matrix(a.queries));
  const EmbeddingMatrix g(io::load_matrix(a.gallery));
  const ScoreMatrix s = cosine_similarity(q, g);
  io::write_matrix(s.values(), a.out);
  out << "wrote " << s.n_queries() << "x" << s.n_gallery() << " similarity matrix to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string scores, gt, ks = "1,5,10", out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const ScoreMatrix s(io::load_matrix(a.scores));
  const GroundTruth gt = io::load_ground_truth(a.gt);
  const auto labels = parse_list<std::size_t>(a.ks, "k");
  const auto ks = clip_ks(labels, s.n_gallery(), err);
  const RetrievalMetrics m = metrics_report(s, gt, ks);
  emit(format_metrics(m, labels, ks, ""), a.out, out);
  return kExitOk;
}

// ---------------------------------------------------------------- ensemble

struct EnsembleArgs {
  std::string manifest, gt, grid, init, out, trace;
  std::size_t metric_k = 1;
  std::size_t k_pred = 0;
  bool raw = false;
};

int cmd_ensemble(const EnsembleArgs& a, std::ostream& out, std::ostream& err) {
  const io::Manifest manifest = io::load_manifest(a.manifest);
  if (manifest.models.empty()) throw ValidationError(a.manifest + ": manifest lists no models");
  const GroundTruth gt = a.gt.empty() ? manifest.gt : io::load_ground_truth(a.gt);
  const WeightGrid grid = a.grid.empty() ? WeightGrid::standard()
                                         : WeightGrid(parse_list<double>(a.grid, "weight"));

  std::vector<ScoreMatrix> models;
  EnsembleOptions opt;
  for (const auto& entry : manifest.models) {
    models.emplace_back(io::load_matrix(entry.path));
    opt.model_ids.push_back(entry.name);
  }
  opt.k_pred = a.k_pred;
  opt.normalize = !a.raw;
  if (!a.init.empty()) opt.init = ScoreMatrix(io::load_matrix(a.init));
  const std::vector<std::size_t> labels{1, 5, 10};
  const auto ks = clip_ks(labels, models.front().n_gallery(), err);
  opt.report_ks = ks;

  const EnsembleResult res = iterative_ensemble(models, gt, grid, MetricKind::recall_at(a.metric_k), opt);
  if (!a.out.empty()) io::write_matrix(res.fused.values(), a.out);

  std::string report = "models=" + std::to_string(res.trace.steps.size()) + "\n";
  report += "metric=R@" + std::to_string(a.metric_k) + "\n";
  report += std::string("normalize=") + (opt.normalize ? "true" : "false") + "\n";
  for (std::size_t i = 0; i < res.trace.steps.size(); ++i) {
    const auto& st = res.trace.steps[i];
    const std::string p = "step." + std::to_string(i) + ".";
    report += p + "model=" + st.model_id + "\n";
    report += p + "w=" + shortest(st.chosen_w) + "\n";
    report += p + "metric=" + fixed4(st.tuning_metric_value) + "\n";
  }
  report += format_metrics(res.trace.final_metrics, labels, ks, "final.");
  emit(report, a.trace, out);
  if (!a.trace.empty()) out << report;
  return kExitOk;
}

// ---------------------------------------------------------------- select

struct SelectArgs {
  std::string features, guidance, out, match, out_scores;
  std::size_t k = kDefaultSelectK;
};

int cmd_select(const SelectArgs& a, std::ostream& out) {
  const EmbeddingMatrix features(io::load_matrix(a.features));
  const ScoreMatrix guidance(io::load_matrix(a.guidance));
  const SelectedFeatures sel = select_topk_features(features, guidance, a.k);

  Matrix idx(sel.n_queries(), sel.k());
  for (std::size_t q = 0; q < sel.n_queries(); ++q) {
    const auto c = sel.candidates(q);
    for (std::size_t r = 0; r < c.size(); ++r) idx(q, r) = static_cast<double>(c[r].gallery_index);
  }
  io::write_matrix(idx, a.out);
  out << "wrote " << sel.n_queries() << "x" << sel.k() << " candidate indices to " << a.out << "\n";

  if (!a.match.empty()) {
    if (a.out_scores.empty()) throw UsageError("--match requires --out-scores");
    const ScoreMatrix fused = rerank_selected(sel, io::load_matrix(a.match));
    io::write_matrix(fused.values(), a.out_scores);
    out << "wrote reranked score matrix to " << a.out_scores << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- losses-check

struct LossesArgs {
  std::uint64_t seed = 0;
  std::size_t instances = 100;
};

Matrix random_prob_rows(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (double& v : m.row(r)) sum += (v = std::exp(rng.uniform(-2.0, 2.0)));
    for (double& v : m.row(r)) v /= sum;
  }
  return m;
}

int cmd_losses_check(const LossesArgs& a, std::ostream& out) {
  int failures = 0;
  const auto report = [&](const std::string& name, bool ok, double value) {
    out << (ok ? "PASS " : "FAIL ") << name << " value=" << shortest(value) << "\n";
    if (!ok) ++failures;
  };
  const auto near = [](double x, double want) { return std::abs(x - want) <= 1e-8; };

  report("itc.singleton", near(itc_loss(ScoreMatrix(Matrix{{0.3}}), 1.0), 0.0),
         itc_loss(ScoreMatrix(Matrix{{0.3}}), 1.0));
  {
    const double v = itc_loss(ScoreMatrix(Matrix{{1, 0}, {0, 1}}), 1.0);
    report("itc.identity_2x2", near(v, std::log1p(std::exp(-1.0))), v);
  }
  {
    const double v = itc_loss(ScoreMatrix(Matrix{{100, 0}, {0, 100}}), 1.0);
    report("itc.saturated", v <= 1e-10, v);
  }
  {
    const double v = itm_loss(ItmBatch({1}, {1.0}));
    report("itm.perfect", v <= 1e-11, v);
  }
  {
    const double v = itm_loss(ItmBatch({1}, {0.5}));
    report("itm.half", near(v, std::log(2.0)), v);
  }
  {
    const double v = itm_loss(ItmBatch({1, 0}, {0.9, 0.2}));
    report("itm.pair", near(v, 0.5 * (-std::log(0.9) - std::log(0.8))), v);
  }
  {
    const double v = mlm_loss(MlmBatch(Matrix{{0, 1, 0}}, {1}));
    report("mlm.perfect", near(v, 0.0), v);
  }
  {
    const double v = mlm_loss(MlmBatch(Matrix{{0.25, 0.25, 0.25, 0.25}}, {2}));
    report("mlm.uniform4", near(v, std::log(4.0)), v);
  }
  {
    const double v = mlm_loss(MlmBatch(Matrix{{0.5, 0.5}, {0.25, 0.75}}, {0, 0}));
    report("mlm.two_positions", near(v, 0.5 * (std::log(2.0) + std::log(4.0))), v);
  }
  {
    const ImageTensor img({2, 2}, {0.1, 0.2, 0.3, 0.4});
    const double v = mim_loss(img, img, MaskSpec::all(4));
    report("mim.perfect", near(v, 0.0), v);
    const ImageTensor rec({2, 2}, {0.6, 0.7, 0.8, 0.9});
    const double w = mim_loss(rec, img, MaskSpec::all(4));
    report("mim.half_diff", near(w, 0.5), w);
  }
  {
    const double v = total_loss(1, 1, 1, 1).total;
    report("total.ones", v == 3.1356, v);
  }

  Rng rng(a.seed);
  double worst_itc = 0.0, worst_itm = 0.0, worst_mlm = 0.0, worst_mim = 0.0;
  for (std::size_t i = 0; i < a.instances; ++i) {
    const std::size_t n = 2 + rng.uniform_index(5);
    Matrix sim(n, n);
    for (double& v : sim.data()) v = rng.uniform(-1.0, 1.0);
    worst_itc = std::max(worst_itc, finite_diff_grad_check(ItcInput{ScoreMatrix(sim), 0.07}, 1e-6));

    std::vector<std::uint8_t> labels(n);
    std::vector<double> probs(n);
    for (std::size_t j = 0; j < n; ++j) {
      labels[j] = rng.bernoulli(0.5) ? 1 : 0;
      probs[j] = rng.uniform(0.01, 0.99);
    }
    worst_itm = std::max(worst_itm, finite_diff_grad_check(ItmBatch(labels, probs), 1e-6));

    const std::size_t vocab = 2 + rng.uniform_index(20);
    std::vector<std::size_t> targets(n);
    for (auto& t : targets) t = rng.uniform_index(vocab);
    worst_mlm = std::max(worst_mlm,
                         finite_diff_grad_check(MlmBatch(random_prob_rows(rng, n, vocab), targets), 1e-6));

    std::vector<double> rec(2 * n * 3), orig(2 * n * 3);
    std::vector<std::uint8_t> flags(rec.size());
    for (std::size_t j = 0; j < rec.size(); ++j) {
      rec[j] = rng.uniform();
      orig[j] = rng.uniform();
      flags[j] = rng.bernoulli(0.6) ? 1 : 0;
    }
    flags[0] = 1;
    worst_mim = std::max(worst_mim, finite_diff_grad_check(
                                        MimInput{ImageTensor({2, n, 3}, rec), ImageTensor({2, n, 3}, orig),
                                                 MaskSpec(flags), true},
                                        1e-6));
  }
  report("gradcheck.itc", worst_itc < 1e-4, worst_itc);
  report("gradcheck.itm", worst_itm < 1e-4, worst_itm);
  report("gradcheck.mlm", worst_mlm < 1e-4, worst_mlm);
  report("gradcheck.mim", worst_mim < 1e-4, worst_mim);
  out << (failures == 0 ? "all loss checks passed\n" : std::to_string(failures) + " loss checks failed\n");
  return failures == 0 ? kExitOk : kExitError;
}

// ---------------------------------------------------------------- lhp-sample

struct LhpArgs {
  std::uint64_t seed = 0;
  std::size_t count = 10;
  std::string out;
};

int cmd_lhp_sample(const LhpArgs& a, std::ostream& out) {
  std::string text = "index,sampled_value,branch\n";
  const auto decisions = sample_decisions(a.seed, a.count);
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    text += std::to_string(i) + "," + shortest(decisions[i].sampled_value) + "," +
            (decisions[i].branch == LhpBranch::Local ? "local" : "global") + "\n";
  }
  emit(text, a.out, out);
  return kExitOk;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  SynthConfig cfg;
  std::string skills;
  std::string out_dir;
};

int cmd_synth(SynthArgs a, std::ostream& out) {
  if (!a.skills.empty()) a.cfg.model_skill = parse_list<double>(a.skills, "skill");
  a.cfg.n_models = a.cfg.model_skill.size();
  a.cfg.validate();
  const fs::path dir(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": cannot create directory: " + ec.message());

  const PairedEmbeddings pe = gen_paired_embeddings(a.cfg);
  io::write_matrix(pe.text.values(), dir / "text.npy");
  io::write_matrix(pe.image.values(), dir / "image.npy");

  io::Manifest manifest;
  manifest.n_queries = a.cfg.n_items;
  manifest.gallery_size = a.cfg.n_items;
  manifest.gt = pe.gt;
  io::write_manifest(manifest, dir / "gt.json");

  const auto models = gen_model_scores(a.cfg);
  for (std::size_t m = 0; m < models.size(); ++m) {
    const std::string name = "model_" + std::to_string(m) + ".npy";
    io::write_matrix(models[m].values(), dir / name);
    manifest.models.push_back({"model_" + std::to_string(m), name});
  }
  io::write_manifest(manifest, dir / "manifest.json");
  out << "wrote synthetic instance (" << a.cfg.n_items << " items, " << models.size() << " models) to "
      << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Score-matrix fusion and Recall@K tools for text-to-image retrieval", "fusionret"};
  app.require_subcommand(1);

  SimArgs sim;
  auto* c_sim = app.add_subcommand("sim", "Cosine similarity of query and gallery embeddings");
  c_sim->add_option("--queries", sim.queries, "Query (text) embeddings, .npy or .csv")->required();
  c_sim->add_option("--gallery", sim.gallery, "Gallery (image) embeddings")->required();
  c_sim->add_option("--out", sim.out, "Output score matrix")->required();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Recall@K of a score matrix");
  c_eval->add_option("--scores", ev.scores, "Score matrix")->required();
  c_eval->add_option("--gt", ev.gt, "Ground-truth manifest (JSON)")->required();
  c_eval->add_option("--k", ev.ks, "Comma-separated K values")->capture_default_str();
  c_eval->add_option("--out", ev.out, "Write the report here instead of stdout");

  EnsembleArgs en;
  auto* c_ens = app.add_subcommand("ensemble", "Iterative weighted fusion of model score matrices");
  c_ens->add_option("--manifest", en.manifest, "Manifest listing model matrices and ground truth")->required();
  c_ens->add_option("--gt", en.gt, "Tuning ground truth (defaults to the manifest's)");
  c_ens->add_option("--grid", en.grid, "Comma-separated retention weights in [0, 1]");
  c_ens->add_option("--metric-k", en.metric_k, "K of the Recall@K tuning metric")->capture_default_str();
  c_ens->add_option("--k-pred", en.k_pred, "Top-k depth of predictions (default: metric K)");
  c_ens->add_flag("--raw", en.raw, "Fuse raw scores without min-max normalization");
  c_ens->add_option("--init-matrix", en.init, "Start from this matrix instead of zeros");
  c_ens->add_option("--out", en.out, "Fused score matrix output");
  c_ens->add_option("--trace", en.trace, "Write the trace report to this file");

  SelectArgs se;
  auto* c_sel = app.add_subcommand("select", "Guidance-driven top-k candidate selection");
  c_sel->add_option("--features", se.features, "Gallery feature bank")->required();
  c_sel->add_option("--guidance", se.guidance, "Guidance score matrix (queries x gallery)")->required();
  c_sel->add_option("--k", se.k, "Candidates per query")->capture_default_str();
  c_sel->add_option("--out", se.out, "Selected gallery indices (queries x k)")->required();
  c_sel->add_option("--match", se.match, "Match scores for the candidates (queries x k)");
  c_sel->add_option("--out-scores", se.out_scores, "Reranked full score matrix");

  LossesArgs lo;
  auto* c_loss = app.add_subcommand("losses-check", "Run loss examples and gradient checks");
  c_loss->add_option("--seed", lo.seed, "Seed for random gradient-check instances")->capture_default_str();
  c_loss->add_option("--instances", lo.instances, "Random instances per loss")->capture_default_str();

  LhpArgs lh;
  auto* c_lhp = app.add_subcommand("lhp-sample", "Emit a seeded local/global decision sequence");
  c_lhp->add_option("--seed", lh.seed, "Generator seed")->capture_default_str();
  c_lhp->add_option("--count", lh.count, "Number of decisions")->capture_default_str();
  c_lhp->add_option("--out", lh.out, "Write CSV here instead of stdout");

  SynthArgs sy;
  auto* c_syn = app.add_subcommand("synth", "Generate a synthetic retrieval instance");
  c_syn->add_option("--items", sy.cfg.n_items, "Number of paired items")->capture_default_str();
  c_syn->add_option("--dim", sy.cfg.dim, "Embedding dimension")->capture_default_str();
  c_syn->add_option("--noise", sy.cfg.noise_sigma, "Embedding noise sigma")->capture_default_str();
  c_syn->add_option("--seed", sy.cfg.seed, "Generator seed")->capture_default_str();
  c_syn->add_option("--skill", sy.skills, "Comma-separated model skills (one model each)");
  c_syn->add_option("--out-dir", sy.out_dir, "Output directory")->required();

  std::vector<const char*> cargv;
  cargv.reserve(argv.size());
  for (const auto& s : argv) cargv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitUsage;
  }

  try {
    if (c_sim->parsed()) return cmd_sim(sim, out);
    if (c_eval->parsed()) return cmd_eval(ev, out, err);
    if (c_ens->parsed()) return cmd_ensemble(en, out, err);
    if (c_sel->parsed()) return cmd_select(se, out);
    if (c_loss->parsed()) return cmd_losses_check(lo, out);
    if (c_lhp->parsed()) return cmd_lhp_sample(lh, out);
    if (c_syn->parsed()) return cmd_synth(sy, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace fusionret::cli
