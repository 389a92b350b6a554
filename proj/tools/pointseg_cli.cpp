// Command-line front end: synthetic data generation, training, evaluation,
// label propagation, clustering baselines and the labelling-budget studies.
//
// Exit codes: 0 success, 1 bad input, 2 runtime/numeric failure.

#include "pointseg/pointseg.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace pointseg;

namespace {

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  if (out.empty()) throw ValidationError("empty list: " + csv);
  return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  for (double v : parse_double_list(csv)) out.push_back(static_cast<int>(v));
  return out;
}

// "x:y,x:y,..." pairs of sample and point fractions
std::vector<BudgetSplit> parse_splits(const std::string& s) {
  std::vector<BudgetSplit> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto colon = tok.find(':');
    if (colon == std::string::npos)
      throw ValidationError("split must look like x:y, got " + tok);
    out.push_back({std::stod(tok.substr(0, colon)), std::stod(tok.substr(colon + 1))});
  }
  if (out.empty()) throw ValidationError("no splits given");
  return out;
}

MaskScheme parse_scheme(const std::string& name, double fraction) {
  if (name == "1pt") return MaskScheme::one_per_category();
  if (name == "full") return MaskScheme::full();
  if (name == "frac") return MaskScheme::fraction_uniform(fraction);
  throw ValidationError("unknown scheme: " + name + " (expected 1pt, frac or full)");
}

std::vector<TrainSample> masked_samples(const Dataset& ds, const MaskScheme& scheme,
                                        std::uint64_t seed) {
  std::vector<TrainSample> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    LabelMask mask = sample_mask(ds.clouds[i], scheme, derive_seed(seed, {rng_tag::kMask, i}));
    out.push_back({ds.clouds[i], std::move(mask), ds.categories[i]});
  }
  return out;
}

std::vector<TrainSample> unmasked_samples(const Dataset& ds) {
  std::vector<TrainSample> out;
  for (std::size_t i = 0; i < ds.size(); ++i)
    out.push_back({ds.clouds[i], LabelMask::none(ds.clouds[i].size()), ds.categories[i]});
  return out;
}

// Config flags shared by the training-style commands. Precedence: built-in
// defaults, then --config file, then explicit flags.
struct ConfigCli {
  TrainConfig cfg;
  AblationFlags flags = AblationFlags::all_on();
  std::string config_path;
  std::string dims_csv = "64,64,128,128";
  std::string constraints = "mustlink";

  static TrainConfig::TrainConstraints parse_constraints(const std::string& s) {
    if (s == "mustlink") return TrainConfig::TrainConstraints::MustLinkOnly;
    if (s == "full") return TrainConfig::TrainConstraints::Full;
    if (s == "none") return TrainConfig::TrainConstraints::None;
    throw ValidationError("--constraints must be mustlink, full or none");
  }

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "config file of key = value lines");
    app->add_option("--k", cfg.k, "k-nn neighbor count")->capture_default_str();
    app->add_option("--eta", cfg.eta, "graph bandwidth")->capture_default_str();
    app->add_option("--gamma", cfg.gamma, "propagation weight")->capture_default_str();
    app->add_option("--lambda-mil", cfg.lambda_mil, "inexact loss weight")->capture_default_str();
    app->add_option("--lambda-sia", cfg.lambda_sia, "Siamese loss weight")->capture_default_str();
    app->add_option("--lambda-smo", cfg.lambda_smo, "smoothness loss weight")->capture_default_str();
    app->add_option("--lr", cfg.lr, "learning rate")->capture_default_str();
    app->add_option("--epochs1", cfg.epochs_stage1, "stage-1 epochs")->capture_default_str();
    app->add_option("--epochs2", cfg.epochs_stage2, "stage-2 epochs")->capture_default_str();
    app->add_option("--batch", cfg.batch_size, "batch size")->capture_default_str();
    app->add_option("--seed", cfg.seed, "master seed")->capture_default_str();
    app->add_option("--dims", dims_csv, "encoder widths d0,d1,d2,d3")->capture_default_str();
    app->add_flag("--seg-on-augmented", cfg.seg_on_augmented,
                  "also apply the masked loss to the augmented branch");
    app->add_option("--constraints", constraints,
                    "training-graph link constraints: mustlink, full or none")
        ->capture_default_str();
    app->add_flag("!--no-mil", flags.mil, "disable the inexact branch");
    app->add_flag("!--no-siamese", flags.siamese, "disable the Siamese branch");
    app->add_flag("!--no-smooth", flags.smooth, "disable the smoothness branch");
  }

  // Re-applies the file under every explicit flag.
  void resolve(CLI::App* app) {
    if (!config_path.empty()) {
      TrainConfig file_cfg = cfg;
      AblationFlags file_flags = flags;
      read_config(config_path, file_cfg, file_flags);
      // explicit CLI flags win over the file
      TrainConfig cli_cfg = cfg;
      AblationFlags cli_flags = flags;
      cfg = file_cfg;
      flags = file_flags;
      if (app->count("--k")) cfg.k = cli_cfg.k;
      if (app->count("--eta")) cfg.eta = cli_cfg.eta;
      if (app->count("--gamma")) cfg.gamma = cli_cfg.gamma;
      if (app->count("--lambda-mil")) cfg.lambda_mil = cli_cfg.lambda_mil;
      if (app->count("--lambda-sia")) cfg.lambda_sia = cli_cfg.lambda_sia;
      if (app->count("--lambda-smo")) cfg.lambda_smo = cli_cfg.lambda_smo;
      if (app->count("--lr")) cfg.lr = cli_cfg.lr;
      if (app->count("--epochs1")) cfg.epochs_stage1 = cli_cfg.epochs_stage1;
      if (app->count("--epochs2")) cfg.epochs_stage2 = cli_cfg.epochs_stage2;
      if (app->count("--batch")) cfg.batch_size = cli_cfg.batch_size;
      if (app->count("--seed")) cfg.seed = cli_cfg.seed;
      if (app->count("--dims")) cfg.encoder_dims = parse_int_list(dims_csv);
      if (app->count("--seg-on-augmented")) cfg.seg_on_augmented = cli_cfg.seg_on_augmented;
      if (app->count("--constraints")) cfg.train_constraints = parse_constraints(constraints);
      if (app->count("--no-mil")) flags.mil = cli_flags.mil;
      if (app->count("--no-siamese")) flags.siamese = cli_flags.siamese;
      if (app->count("--no-smooth")) flags.smooth = cli_flags.smooth;
    } else {
      cfg.encoder_dims = parse_int_list(dims_csv);
      cfg.train_constraints = parse_constraints(constraints);
    }
    cfg.validate();
  }
};

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::string>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << header << '\n';
  for (const auto& r : rows) out << r << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakly supervised point cloud segmentation"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  app.add_option("--threads", threads, "worker threads (1 = fully serial)")
      ->capture_default_str();

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  std::string gen_family = "barbell", gen_out;
  int gen_shapes = 32, gen_points = 256;
  double gen_jitter = 0.01, gen_variation = 0.0;
  std::uint64_t gen_seed = 1;
  bool gen_rgb = false;
  gen->add_option("--family", gen_family, "barbell, table or rocket")->capture_default_str();
  gen->add_option("--shapes", gen_shapes, "number of clouds")->capture_default_str();
  gen->add_option("--points", gen_points, "points per cloud")->capture_default_str();
  gen->add_option("--jitter", gen_jitter, "surface jitter sigma")->capture_default_str();
  gen->add_option("--variation", gen_variation, "per-shape geometry spread in [0, 0.4]")
      ->capture_default_str();
  gen->add_flag("--rgb", gen_rgb, "attach per-part colors");
  gen->add_option("--seed", gen_seed, "generation seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output directory")->required();

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "two-stage weakly supervised training");
  std::string train_data, train_test, train_out, train_scheme = "1pt";
  double train_fraction = 0.1;
  bool train_propagate_eval = false;
  ConfigCli train_cfg;
  train_cmd->add_option("--data", train_data, "training dataset directory")->required();
  train_cmd->add_option("--test", train_test, "held-out dataset directory for evaluation");
  train_cmd->add_option("--scheme", train_scheme, "mask scheme: 1pt, frac or full")
      ->capture_default_str();
  train_cmd->add_option("--fraction", train_fraction, "labelled fraction for --scheme frac")
      ->capture_default_str();
  train_cmd->add_flag("--propagate-eval", train_propagate_eval,
                      "refine evaluation logits by label propagation");
  train_cmd->add_option("--out", train_out, "run directory")->required();
  train_cfg.attach(train_cmd);

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_out = "metrics.json", eval_absent = "exclude";
  bool eval_propagate = false;
  ConfigCli eval_cfg;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
  eval_cmd->add_flag("--propagate", eval_propagate, "refine logits by label propagation");
  eval_cmd->add_option("--absent-class", eval_absent,
                       "classes absent from pred and gt: exclude or score_one")
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "metrics output path")->capture_default_str();
  eval_cfg.attach(eval_cmd);

  // ---- propagate ----
  auto* prop_cmd = app.add_subcommand("propagate", "closed-form label propagation on a logits file");
  std::string prop_logits, prop_cloud, prop_out_logits = "refined_logits.txt",
              prop_out_pred = "prediction.txt";
  double prop_gamma = 1.0, prop_eta = 1e3, prop_tol = 1e-8;
  int prop_k = 10;
  bool prop_constrained = false;
  prop_cmd->add_option("--logits", prop_logits, "logits file (N K header)")->required();
  prop_cmd->add_option("--cloud", prop_cloud, "cloud file the graph is built on")->required();
  prop_cmd->add_flag("--constrained", prop_constrained,
                     "transductive mode: link constraints from the cloud's known labels "
                     "(-1 marks unknown)");
  prop_cmd->add_option("--gamma", prop_gamma, "fidelity weight")->capture_default_str();
  prop_cmd->add_option("--k", prop_k, "k-nn neighbor count")->capture_default_str();
  prop_cmd->add_option("--eta", prop_eta, "graph bandwidth")->capture_default_str();
  prop_cmd->add_option("--tol", prop_tol, "relative residual tolerance")->capture_default_str();
  prop_cmd->add_option("--out-logits", prop_out_logits, "refined logits path")
      ->capture_default_str();
  prop_cmd->add_option("--out-pred", prop_out_pred, "prediction cloud path")
      ->capture_default_str();

  // ---- baseline ----
  auto* base_cmd = app.add_subcommand("baseline", "unsupervised clustering baselines");
  std::string base_method = "kmeans", base_data, base_out;
  std::uint64_t base_seed = 1;
  int base_k = 10;
  double base_eta = 1e3;
  base_cmd->add_option("--method", base_method, "kmeans or ncut")->capture_default_str();
  base_cmd->add_option("--data", base_data, "dataset directory")->required();
  base_cmd->add_option("--seed", base_seed, "clustering seed")->capture_default_str();
  base_cmd->add_option("--k", base_k, "k-nn neighbor count (ncut graph)")->capture_default_str();
  base_cmd->add_option("--eta", base_eta, "graph bandwidth (ncut graph)")->capture_default_str();
  base_cmd->add_option("--out", base_out, "output directory")->required();

  // ---- gradstudy ----
  auto* grad_cmd = app.add_subcommand("gradstudy", "masked-vs-full gradient variance study");
  std::string grad_data, grad_grid = "8,16,32,64,128", grad_out = "gradstudy.csv",
              grad_dims = "64,64,128,128";
  int grad_draws = 30;
  std::uint64_t grad_seed = 1;
  grad_cmd->add_option("--data", grad_data, "dataset directory")->required();
  grad_cmd->add_option("--grid", grad_grid, "label counts, comma separated")
      ->capture_default_str();
  grad_cmd->add_option("--draws", grad_draws, "mask draws per label count")
      ->capture_default_str();
  grad_cmd->add_option("--seed", grad_seed, "init + draw seed")->capture_default_str();
  grad_cmd->add_option("--dims", grad_dims, "encoder widths d0,d1,d2,d3")->capture_default_str();
  grad_cmd->add_option("--out", grad_out, "CSV output path")->capture_default_str();

  // ---- budget ----
  auto* budget_cmd = app.add_subcommand("budget", "fixed-budget labelling-strategy experiment");
  std::string budget_data, budget_test, budget_splits = "0.1:1.0,0.5:0.2,1.0:0.1",
              budget_out = "budget.csv";
  double budget_total = 0.1;
  ConfigCli budget_cfg;
  budget_cmd->add_option("--data", budget_data, "training dataset directory")->required();
  budget_cmd->add_option("--test", budget_test, "held-out dataset directory")->required();
  budget_cmd->add_option("--budget", budget_total, "total labelled fraction")
      ->capture_default_str();
  budget_cmd->add_option("--splits", budget_splits, "x:y pairs, comma separated")
      ->capture_default_str();
  budget_cmd->add_option("--out", budget_out, "CSV output path")->capture_default_str();
  budget_cfg.attach(budget_cmd);

  // ---- sweep ----
  auto* sweep_cmd = app.add_subcommand("sweep", "labelled-amount sweep (baseline runs)");
  std::string sweep_data, sweep_test, sweep_fracs = "0.01,0.1,1.0", sweep_out = "sweep.csv";
  ConfigCli sweep_cfg;
  sweep_cmd->add_option("--data", sweep_data, "training dataset directory")->required();
  sweep_cmd->add_option("--test", sweep_test, "held-out dataset directory")->required();
  sweep_cmd->add_option("--fractions", sweep_fracs, "labelled fractions, comma separated")
      ->capture_default_str();
  sweep_cmd->add_option("--out", sweep_out, "CSV output path")->capture_default_str();
  sweep_cfg.attach(sweep_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*gen) {
      SyntheticSpec spec;
      spec.family = family_from_name(gen_family);
      spec.num_shapes = gen_shapes;
      spec.points_per_shape = gen_points;
      spec.jitter_sigma = gen_jitter;
      spec.variation = gen_variation;
      spec.seed = gen_seed;
      spec.with_rgb = gen_rgb;
      auto clouds = generate_synthetic(spec);
      save_dataset(clouds, gen_family, gen_out);
      std::cout << gen_out << "\n";
      return 0;
    }

    if (*train_cmd) {
      train_cfg.resolve(train_cmd);
      Dataset ds = load_dataset(train_data);
      auto samples = masked_samples(ds, parse_scheme(train_scheme, train_fraction),
                                    train_cfg.cfg.seed);
      RunRecord record = train(samples, train_cfg.cfg, train_cfg.flags, threads);
      if (!train_test.empty()) {
        Dataset test = load_dataset(train_test);
        record.eval = evaluate(record.final_params, unmasked_samples(test), train_cfg.cfg,
                               train_propagate_eval, threads);
      }
      save_run(record, train_out);
      std::cout << train_out << "\n";
      return 0;
    }

    if (*eval_cmd) {
      eval_cfg.resolve(eval_cmd);
      AbsentClassPolicy policy;
      if (eval_absent == "exclude") policy = AbsentClassPolicy::Exclude;
      else if (eval_absent == "score_one") policy = AbsentClassPolicy::ScoreOne;
      else throw ValidationError("--absent-class must be exclude or score_one");
      EncoderParams params = load_checkpoint(eval_ckpt);
      Dataset ds = load_dataset(eval_data);
      EvalResult ev = evaluate(params, unmasked_samples(ds), eval_cfg.cfg, eval_propagate,
                               threads, policy);
      write_metrics(ev, params.num_classes, eval_out);
      std::cout << eval_out << "\n";
      return 0;
    }

    if (*prop_cmd) {
      Logits z = load_logits(prop_logits);
      PointCloud cloud = load_cloud(prop_cloud, /*allow_unknown=*/true);
      if (cloud.size() != static_cast<int>(z.rows()))
        throw ValidationError("propagate: cloud and logits disagree on N");
      GraphParams gp;
      gp.k = prop_k;
      gp.eta = prop_eta;
      AffinityGraph graph = knn_weights(cloud, gp);
      if (prop_constrained) {
        std::vector<std::uint8_t> known(cloud.labels.size());
        std::vector<int> safe_labels = cloud.labels;
        for (std::size_t i = 0; i < cloud.labels.size(); ++i) {
          known[i] = cloud.labels[i] >= 0 ? 1 : 0;
          if (cloud.labels[i] < 0) safe_labels[i] = 0;
        }
        graph = apply_link_constraints(graph, LabelMask::from_flags(std::move(known)),
                                       safe_labels);
      }
      PropagationResult res = propagate(z, graph, prop_gamma, prop_tol);
      save_logits(res.refined, prop_out_logits);
      PointCloud pred = cloud;
      pred.labels = res.predicted;
      pred.num_classes = std::max(cloud.num_classes, static_cast<int>(z.cols()));
      save_cloud(pred, prop_out_pred);
      std::cout << prop_out_logits << "\n";
      return 0;
    }

    if (*base_cmd) {
      Dataset ds = load_dataset(base_data);
      fs::create_directories(base_out);
      std::vector<std::pair<std::string, IoUReport>> reports;
      std::ofstream manifest(fs::path(base_out) / "manifest.txt");
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const PointCloud& cloud = ds.clouds[i];
        Clustering clus;
        std::uint64_t cloud_seed = derive_seed(base_seed, {rng_tag::kInit, i});
        if (base_method == "kmeans") {
          clus = kmeans(cloud.features(), cloud.num_classes, cloud_seed);
        } else if (base_method == "ncut") {
          GraphParams gp;
          gp.k = base_k;
          gp.eta = base_eta;
          clus = ncut(knn_weights(cloud, gp), cloud.num_classes, cloud_seed, cloud.features());
        } else {
          throw ValidationError("unknown baseline method: " + base_method);
        }
        IoUReport rep = best_permutation_miou(clus.assignment, cloud.labels, cloud.num_classes);
        reports.emplace_back(ds.categories[i], rep);
        PointCloud pred = cloud;
        pred.labels = clus.assignment;
        std::string name = "pred_" + ds.names[i];
        save_cloud(pred, (fs::path(base_out) / name).string());
        manifest << name << ' ' << ds.categories[i] << '\n';
      }
      AggregateResult agg = aggregate(reports);
      EvalResult ev;
      ev.cat_avg = agg.cat_avg;
      ev.samp_avg = agg.samp_avg;
      ev.accuracy = 0.0;
      for (auto& [cat, rep] : reports) ev.per_sample.push_back(rep);
      write_metrics(ev, ds.clouds[0].num_classes, (fs::path(base_out) / "metrics.json").string());
      std::cout << base_out << "\n";
      return 0;
    }

    if (*grad_cmd) {
      Dataset ds = load_dataset(grad_data);
      EncoderParams params = init_params(grad_seed, ds.clouds[0].feature_count(),
                                         ds.clouds[0].num_classes, parse_int_list(grad_dims));
      GradStudyResult res =
          grad_study(ds.clouds, params, parse_int_list(grad_grid), grad_draws, grad_seed, threads);
      std::vector<std::string> rows;
      for (std::size_t i = 0; i < res.label_counts.size(); ++i) {
        std::ostringstream os;
        os << res.label_counts[i] << ',' << res.variances[i];
        rows.push_back(os.str());
      }
      write_csv(grad_out, "n,variance", rows);
      std::cout << "slope " << res.slope << "\n" << grad_out << "\n";
      return 0;
    }

    if (*budget_cmd) {
      budget_cfg.resolve(budget_cmd);
      Dataset tr = load_dataset(budget_data);
      Dataset te = load_dataset(budget_test);
      auto rows = budget_experiment(tr, te, budget_total, parse_splits(budget_splits),
                                    budget_cfg.cfg, threads);
      std::vector<std::string> lines;
      for (const auto& r : rows) {
        std::ostringstream os;
        os << r.split.sample_fraction << ',' << r.split.point_fraction << ',' << r.cat_avg << ','
           << r.samp_avg;
        lines.push_back(os.str());
      }
      write_csv(budget_out, "sample_fraction,point_fraction,cat_avg,samp_avg", lines);
      std::cout << budget_out << "\n";
      return 0;
    }

    if (*sweep_cmd) {
      sweep_cfg.resolve(sweep_cmd);
      Dataset tr = load_dataset(sweep_data);
      Dataset te = load_dataset(sweep_test);
      auto rows = label_amount_sweep(tr, te, parse_double_list(sweep_fracs), sweep_cfg.cfg,
                                     threads);
      std::vector<std::string> lines;
      for (const auto& r : rows) {
        std::ostringstream os;
        os << r.fraction << ',' << r.cat_avg << ',' << r.samp_avg;
        lines.push_back(os.str());
      }
      write_csv(sweep_out, "fraction,cat_avg,samp_avg", lines);
      std::cout << sweep_out << "\n";
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
