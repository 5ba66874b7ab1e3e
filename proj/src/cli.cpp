#include "pmlda/cli.hpp"

#include "pmlda/core.hpp"
#include "pmlda/corpus.hpp"
#include "pmlda/errors.hpp"
#include "pmlda/init.hpp"
#include "pmlda/io.hpp"
#include "pmlda/metrics.hpp"
#include "pmlda/sampler.hpp"
#include "pmlda/synthgen.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace pmlda::cli {

namespace fs = std::filesystem;

namespace {

struct UnmixOptions {
  std::string cube;
  std::string segmentation;
  std::string seeds_file;
  std::string out_dir;
  Index block = 0;
  Index K = 3;
  double alpha = 5.0;
  double lambda = 1.0;
  Index T = 2000;
  Index burn_in = -1;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string mode = "normalized";
  std::string estimator = "mean";
  std::string covariance = "auto";
  Index record_every = 10;
  bool no_normalize = false;
  bool per_topic_sigma2 = false;
};

struct GenerateOptions {
  std::string out_dir;
  Index rows = 40;
  Index cols = 40;
  Index bands = 20;
  Index K = 3;
  double sigma2 = 1e-4;
  double alpha = 5.0;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  std::string mixing = "geometric-mean";
  Index block = 8;
  bool pure_pixels = false;
  double min_angle_deg = 15.0;
  std::string endmembers;
  bool csv = false;
};

struct EvaluateOptions {
  std::string results;
  std::string proportions;
  std::string endmembers;
  std::string model;
  std::string cube;
  std::string truth;
  std::string out;
};

Eigen::VectorXd topic_variances(const EndmemberModel &model) {
  Eigen::VectorXd v(model.topics());
  for (Index k = 0; k < model.topics(); ++k)
    v[k] = model.topic_variance(k);
  return v;
}

std::string join(const Eigen::VectorXd &v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i)
    s += (i ? "," : "") + io::format_double(v[i]);
  return s;
}

double to_double(const std::string &text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size())
      return v;
  } catch (const std::exception &) {
  }
  throw IoError("cannot parse number '" + text + "'");
}

Eigen::VectorXd split_doubles(const std::string &text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ','))
    values.push_back(to_double(token));
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
}

void write_key_values_to(std::ostream &out,
                         const std::vector<std::pair<std::string, std::string>> &entries) {
  for (const auto &[k, v] : entries)
    out << k << '=' << v << '\n';
}

int cmd_unmix(const UnmixOptions &opt, std::ostream &out) {
  HyperspectralCube cube = io::read_cube(opt.cube);
  if (!opt.no_normalize)
    cube = normalize_pixels(cube);

  SegmentationMap seg;
  if (!opt.segmentation.empty()) {
    seg = io::read_segmentation(opt.segmentation);
  } else {
    const Index block = opt.block > 0 ? opt.block : default_grid_block(cube.rows(), cube.cols());
    seg = grid_segmentation(cube.rows(), cube.cols(), block);
  }

  CovarianceKind covariance = CovarianceKind::full;
  if (opt.covariance == "diagonal" || (opt.covariance == "auto" && cube.bands() > 64))
    covariance = CovarianceKind::diagonal;
  else if (opt.covariance != "full" && opt.covariance != "auto")
    throw ValidationError("--covariance must be full, diagonal or auto");
  const Corpus corpus = build_corpus(cube, seg, covariance);

  ChainConfig config;
  auto &hp = config.hp;
  hp.alpha = opt.alpha;
  hp.lambda = opt.lambda;
  hp.K = opt.K;
  hp.T = opt.T;
  hp.burn_in = opt.burn_in >= 0 ? opt.burn_in : opt.T / 2;
  hp.seed = opt.seed;
  hp.word_likelihood_mode = parse_word_likelihood_mode(opt.mode);
  hp.validate();
  config.threads = opt.threads;
  config.per_topic_sigma2 = opt.per_topic_sigma2;
  config.record_every = std::max<Index>(1, std::min(opt.record_every, hp.T - hp.burn_in));
  const Estimator estimator = parse_estimator(opt.estimator);

  Eigen::MatrixXd seeds;
  if (!opt.seeds_file.empty()) {
    seeds = io::read_endmember_csv(opt.seeds_file);
    if (seeds.cols() != hp.K || seeds.rows() != cube.bands())
      throw ValidationError("seeds file must hold K rows of " + std::to_string(cube.bands()) +
                            " values");
  } else {
    seeds = orthogonal_projection_endmembers(corpus, hp.K);
  }

  const ChainState init = initial_state(corpus, hp, seeds);
  const ChainTrace trace = run_chain(corpus, config, init);
  UnmixResult result = summarize(trace, hp.burn_in);
  result.posterior_mean.log_joint = log_joint(corpus.pixels, result.posterior_mean, hp);
  const ChainState &chosen = result.estimate(estimator);
  const Index n = corpus.pixel_count();

  const fs::path dir = opt.out_dir;
  fs::create_directories(dir);

  io::write_endmember_csv(dir / "endmembers.csv", chosen.model.means);
  const Eigen::MatrixXd proportions = proportion_matrix(chosen, n);
  io::write_matrix_csv(dir / "proportions.csv", proportions.transpose());
  for (Index k = 0; k < hp.K; ++k)
    io::write_pgm(dir / ("proportion_" + std::to_string(k) + ".pgm"), cube.rows(), cube.cols(),
                  proportions.row(k).transpose());

  Eigen::MatrixXd docs(static_cast<Index>(chosen.documents.size()), hp.K + 2);
  for (std::size_t d = 0; d < chosen.documents.size(); ++d) {
    const auto &doc = chosen.documents[d];
    docs(static_cast<Index>(d), 0) = static_cast<double>(doc.id);
    docs(static_cast<Index>(d), 1) = doc.s;
    docs.row(static_cast<Index>(d)).tail(hp.K) = doc.pi.weights().transpose();
  }
  io::write_matrix_csv(dir / "documents.csv", docs);

  {
    std::ofstream trace_out(dir / "trace.csv", std::ios::trunc);
    if (!trace_out)
      throw IoError("cannot write trace.csv");
    trace_out << "# iteration,log_joint,best_log_joint,acc_pi,acc_s,acc_z,acc_mu,acc_sigma2\n";
    for (const auto &it : trace.iterations) {
      trace_out << it.iteration << ',' << io::format_double(it.log_joint) << ','
                << io::format_double(it.best_log_joint);
      for (std::size_t u = 0; u < kUpdateKinds; ++u)
        trace_out << ',' << io::format_double(it.counts.rate(static_cast<UpdateKind>(u)));
      trace_out << '\n';
    }
  }

  std::vector<std::pair<std::string, std::string>> model_entries = {
      {"K", std::to_string(hp.K)},
      {"bands", std::to_string(cube.bands())},
      {"rows", std::to_string(cube.rows())},
      {"cols", std::to_string(cube.cols())},
      {"documents", std::to_string(corpus.document_count())},
      {"estimator", to_string(estimator)},
      {"mode", to_string(hp.word_likelihood_mode)},
      {"normalized", opt.no_normalize ? "false" : "true"},
      {"sigma2", io::format_double(chosen.model.sigma2)},
      {"alpha", io::format_double(hp.alpha)},
      {"lambda", io::format_double(hp.lambda)},
      {"T", std::to_string(hp.T)},
      {"burn_in", std::to_string(hp.burn_in)},
      {"seed", std::to_string(hp.seed)},
      {"samples_used", std::to_string(result.samples_used)},
  };
  if (chosen.model.per_topic_sigma2)
    model_entries.emplace_back("per_topic_sigma2", join(*chosen.model.per_topic_sigma2));
  io::write_key_values(dir / "model.txt", model_entries);

  std::vector<std::pair<std::string, std::string>> metrics;
  for (const Estimator e : {Estimator::posterior_mean, Estimator::map}) {
    const ChainState &state = result.estimate(e);
    const Eigen::MatrixXd p = proportion_matrix(state, n);
    const std::string tag = to_string(e);
    metrics.emplace_back("entropy_" + tag, io::format_double(proportion_entropy(p)));
    metrics.emplace_back("ncm_log_likelihood_" + tag,
                         io::format_double(ncm_log_likelihood(corpus.pixels, state.model.means, p,
                                                              topic_variances(state.model))));
    metrics.emplace_back("log_joint_" + tag, io::format_double(state.log_joint));
  }
  for (std::size_t u = 0; u < kUpdateKinds; ++u) {
    static const char *names[] = {"pi", "s", "z", "mu", "sigma2"};
    metrics.emplace_back(std::string("acceptance_") + names[u],
                         io::format_double(trace.totals.rate(static_cast<UpdateKind>(u))));
  }
  io::write_key_values(dir / "metrics.txt", metrics);
  {
    std::ofstream csv(dir / "metrics.csv", std::ios::trunc);
    if (!csv)
      throw IoError("cannot write metrics.csv");
    csv << "metric,value\n";
    for (const auto &[k, v] : metrics)
      csv << k << ',' << v << '\n';
  }

  write_key_values_to(out, metrics);
  return kOk;
}

int cmd_generate(const GenerateOptions &opt, std::ostream &out) {
  SceneSpec spec;
  spec.rows = opt.rows;
  spec.cols = opt.cols;
  spec.sigma2 = opt.sigma2;
  spec.alpha = opt.alpha;
  spec.lambda = opt.lambda;
  spec.seed = opt.seed;
  spec.mixing = parse_mixing_model(opt.mixing);
  spec.pure_pixels = opt.pure_pixels;
  if (opt.block < 1)
    throw ValidationError("--block must be >= 1");
  spec.layout = grid_segmentation(opt.rows, opt.cols, opt.block);
  if (!opt.endmembers.empty()) {
    spec.means = io::read_endmember_csv(opt.endmembers);
  } else {
    if (opt.bands < 1 || opt.K < 1)
      throw ValidationError("--bands and --K must be >= 1");
    spec.means = random_endmembers(opt.bands, opt.K, opt.min_angle_deg * std::numbers::pi / 180.0,
                                   opt.seed);
  }

  const SyntheticScene scene = generate_scene(spec);
  const fs::path dir = opt.out_dir;
  fs::create_directories(dir);
  io::write_cube(dir / "scene.hdr", scene.cube);
  if (opt.csv)
    io::write_cube_csv(dir / "scene.csv", scene.cube);
  io::write_segmentation_csv(dir / "segmentation.csv", spec.layout);
  io::write_truth(dir / "truth.json", scene.truth);
  io::write_endmember_csv(dir / "truth_endmembers.csv", scene.truth.model.means);
  io::write_matrix_csv(dir / "truth_proportions.csv", scene.truth.proportions.transpose());
  io::write_key_values(dir / "truth_model.txt",
                       {{"K", std::to_string(spec.topics())},
                        {"bands", std::to_string(spec.bands())},
                        {"normalized", "false"},
                        {"sigma2", io::format_double(spec.sigma2)}});

  out << "rows=" << spec.rows << "\ncols=" << spec.cols << "\nbands=" << spec.bands()
      << "\nK=" << spec.topics() << "\ndocuments=" << spec.layout.label_count() << '\n';
  return kOk;
}

int cmd_evaluate(const EvaluateOptions &opt, std::ostream &out) {
  const fs::path results = opt.results;
  auto pick = [&](const std::string &explicit_path, const char *default_name) -> fs::path {
    if (!explicit_path.empty())
      return explicit_path;
    if (!opt.results.empty())
      return results / default_name;
    return {};
  };
  const fs::path proportions_path = pick(opt.proportions, "proportions.csv");
  const fs::path endmembers_path = pick(opt.endmembers, "endmembers.csv");
  const fs::path model_path = pick(opt.model, "model.txt");
  if (proportions_path.empty() && endmembers_path.empty())
    throw ValidationError("evaluate needs --results or --proportions/--endmembers");

  std::vector<std::pair<std::string, std::string>> report;
  Eigen::MatrixXd proportions;
  if (!proportions_path.empty()) {
    proportions = io::read_matrix_csv(proportions_path).transpose();
    report.emplace_back("entropy", io::format_double(proportion_entropy(proportions)));
  }
  Eigen::MatrixXd endmembers;
  if (!endmembers_path.empty())
    endmembers = io::read_endmember_csv(endmembers_path);

  if (!opt.cube.empty()) {
    if (proportions.size() == 0 || endmembers.size() == 0 || model_path.empty())
      throw ValidationError("log-likelihood needs proportions, endmembers and a model file");
    const io::KeyValues model = io::read_key_values(model_path);
    HyperspectralCube cube = io::read_cube(opt.cube);
    if (!model.count("normalized") || model.at("normalized") != "false")
      cube = normalize_pixels(cube);
    Eigen::VectorXd variances;
    if (model.count("per_topic_sigma2"))
      variances = split_doubles(model.at("per_topic_sigma2"));
    else if (model.count("sigma2"))
      variances = Eigen::VectorXd::Constant(endmembers.cols(), to_double(model.at("sigma2")));
    else
      throw IoError("model file lacks sigma2");
    report.emplace_back("ncm_log_likelihood",
                        io::format_double(ncm_log_likelihood(cube.spectra(), endmembers,
                                                             proportions, variances)));
  }

  if (!opt.truth.empty()) {
    if (endmembers.size() == 0)
      throw ValidationError("SAD evaluation needs estimated endmembers");
    const TruthRecord truth = io::read_truth(opt.truth);
    const EndmemberMatch match = match_endmembers(truth.model.means, endmembers);
    std::string assignment;
    for (std::size_t k = 0; k < match.estimate_for_truth.size(); ++k) {
      assignment += (k ? "," : "") + std::to_string(match.estimate_for_truth[k]);
      report.emplace_back("sad_deg_" + std::to_string(k),
                          io::format_double(match.sad[static_cast<Index>(k)] * 180.0 /
                                            std::numbers::pi));
    }
    report.emplace_back("assignment", assignment);
    report.emplace_back("sad_mean_deg",
                        io::format_double(match.sad.mean() * 180.0 / std::numbers::pi));
    if (proportions.size() != 0)
      report.emplace_back("proportion_rmse",
                          io::format_double(proportion_rmse(truth.proportions, proportions, match)));
  }

  write_key_values_to(out, report);
  if (!opt.out.empty())
    io::write_key_values(opt.out, report);
  return kOk;
}

/// Flags come first, then config-file values, then defaults: every key in
/// the config file that is not already on the command line is appended as
/// `--key=value`.
std::vector<std::string> merge_config(const std::vector<std::string> &args) {
  std::vector<std::string> merged;
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[++i];
      continue;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      continue;
    }
    merged.push_back(args[i]);
  }
  if (config_path.empty())
    return merged;

  for (const auto &[key, value] : io::read_key_values(config_path)) {
    const std::string flag = "--" + key;
    bool present = false;
    for (const auto &a : args)
      present = present || a == flag || a.rfind(flag + "=", 0) == 0;
    if (!present)
      merged.push_back(flag + "=" + value);
  }
  return merged;
}

} // namespace

int run(const std::vector<std::string> &raw_args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Partial-membership LDA unmixing for hyperspectral images"};
  app.require_subcommand(1);

  UnmixOptions unmix;
  auto *u = app.add_subcommand("unmix", "estimate endmember distributions and proportion maps");
  u->add_option("--cube", unmix.cube, "cube header (.hdr) or pixel CSV")->required();
  u->add_option("--segmentation", unmix.segmentation, "superpixel label raster (CSV or .hdr)");
  u->add_option("--block", unmix.block, "grid block side when no segmentation is given");
  u->add_option("--K", unmix.K, "number of endmembers")->capture_default_str();
  u->add_option("--alpha", unmix.alpha, "Dirichlet concentration of pi")->capture_default_str();
  u->add_option("--lambda", unmix.lambda, "exponential rate of s")->capture_default_str();
  u->add_option("--T", unmix.T, "iterations")->capture_default_str();
  u->add_option("--burn-in", unmix.burn_in, "discarded iterations (default T/2)");
  u->add_option("--seed", unmix.seed)->capture_default_str();
  u->add_option("--threads", unmix.threads, "document-update workers")
      ->envname("PMLDA_THREADS")
      ->capture_default_str();
  u->add_option("--mode", unmix.mode, "normalized | raw-product")->capture_default_str();
  u->add_option("--estimator", unmix.estimator, "mean | map")->capture_default_str();
  u->add_option("--seeds-file", unmix.seeds_file, "CSV of K initial endmember means");
  u->add_option("--covariance", unmix.covariance, "full | diagonal | auto")->capture_default_str();
  u->add_option("--record-every", unmix.record_every, "thinning interval")->capture_default_str();
  u->add_flag("--no-normalize", unmix.no_normalize, "skip unit-length pixel normalization");
  u->add_flag("--per-topic-sigma2", unmix.per_topic_sigma2, "one variance per endmember");
  u->add_option("--out-dir", unmix.out_dir)->required();

  GenerateOptions gen;
  auto *g = app.add_subcommand("generate", "draw a synthetic scene with ground truth");
  g->add_option("--out-dir", gen.out_dir)->required();
  g->add_option("--rows", gen.rows)->capture_default_str();
  g->add_option("--cols", gen.cols)->capture_default_str();
  g->add_option("--bands", gen.bands)->capture_default_str();
  g->add_option("--K", gen.K)->capture_default_str();
  g->add_option("--sigma2", gen.sigma2)->capture_default_str();
  g->add_option("--alpha", gen.alpha)->capture_default_str();
  g->add_option("--lambda", gen.lambda)->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--mode", gen.mixing, "ncm | geometric-mean | lmm+noise")->capture_default_str();
  g->add_option("--block", gen.block, "grid document side")->capture_default_str();
  g->add_flag("--pure-pixels", gen.pure_pixels, "force one pure pixel per endmember");
  g->add_option("--min-angle-deg", gen.min_angle_deg)->capture_default_str();
  g->add_option("--endmembers", gen.endmembers, "CSV of true means (K rows)");
  g->add_flag("--csv", gen.csv, "also write the cube as CSV");

  EvaluateOptions eval;
  auto *e = app.add_subcommand("evaluate", "entropy, NCM log-likelihood and SAD against truth");
  e->add_option("--results", eval.results, "unmix output directory");
  e->add_option("--proportions", eval.proportions);
  e->add_option("--endmembers", eval.endmembers);
  e->add_option("--model", eval.model);
  e->add_option("--cube", eval.cube);
  e->add_option("--truth", eval.truth);
  e->add_option("--out", eval.out, "also write the report to this file");

  try {
    std::vector<std::string> args = merge_config(raw_args);
    std::vector<std::string> storage{"pmlda"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<const char *> argv;
    for (const auto &s : storage)
      argv.push_back(s.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError &ex) {
    err << "pmlda: " << ex.what() << '\n';
    return kUsage;
  } catch (const IoError &ex) {
    err << "pmlda: " << ex.what() << '\n';
    return kIoFailure;
  }

  try {
    if (u->parsed())
      return cmd_unmix(unmix, out);
    if (g->parsed())
      return cmd_generate(gen, out);
    if (e->parsed())
      return cmd_evaluate(eval, out);
  } catch (const IoError &ex) {
    err << "pmlda: " << ex.what() << '\n';
    return kIoFailure;
  } catch (const fs::filesystem_error &ex) {
    err << "pmlda: " << ex.what() << '\n';
    return kIoFailure;
  } catch (const ValidationError &ex) {
    err << "pmlda: " << ex.what() << '\n';
    return kUsage;
  } catch (const std::exception &ex) {
    err << "pmlda: internal error: " << ex.what() << '\n';
    return kInternal;
  }
  return kUsage;
}

} // namespace pmlda::cli
