#pragma once

#include "pointseg/augment.hpp"
#include "pointseg/encoder.hpp"
#include "pointseg/graph.hpp"
#include "pointseg/io.hpp"
#include "pointseg/losses.hpp"
#include "pointseg/metrics.hpp"
#include "pointseg/propagate.hpp"
#include "pointseg/threading.hpp"
#include "pointseg/types.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace pointseg {

// Loss branches that can be switched off for ablations. seg is always on.
struct AblationFlags {
  bool mil = true;
  bool siamese = true;
  bool smooth = true;

  static AblationFlags all_on() { return {true, true, true}; }
  static AblationFlags all_off() { return {false, false, false}; }
};

struct TrainSample {
  PointCloud cloud;
  LabelMask mask;
  std::string category = "default";
};

struct EvalResult {
  double cat_avg = 0.0;
  double samp_avg = 0.0;
  double accuracy = 0.0;
  std::vector<IoUReport> per_sample;
};

struct RunRecord {
  std::vector<LossBreakdown> epoch_losses;  // epochs_stage1 + epochs_stage2 entries
  EncoderParams final_params;
  EvalResult eval;
  double wall_seconds = 0.0;
  TrainConfig config;
  AblationFlags flags;
};

// Variance of the masked-vs-full gradient gap across mask draws, one entry
// per label count, plus the fitted log-log slope.
struct GradStudyResult {
  std::vector<int> label_counts;
  std::vector<double> variances;  // mean over parameters of per-parameter variance
  double slope = 0.0;             // least-squares slope of log(var) vs log(n)
  int draws_per_n = 0;
};

// The graph used by the stage-2 regularizer: k-nn affinities with link
// overrides from the sample's training mask.
inline AffinityGraph build_training_graph(const PointCloud& cloud, const LabelMask& mask,
                                          const TrainConfig& cfg) {
  GraphParams gp;
  gp.k = cfg.k;
  gp.eta = cfg.eta;
  AffinityGraph g = knn_weights(cloud, gp);
  switch (cfg.train_constraints) {
    case TrainConfig::TrainConstraints::None:
      return g;
    case TrainConfig::TrainConstraints::Full:
      return apply_link_constraints(g, mask, cloud.labels);
    case TrainConfig::TrainConstraints::MustLinkOnly:
      break;
  }
  return apply_link_constraints(g, mask, cloud.labels, /*must_link_only=*/true);
}

inline AffinityGraph build_inference_graph(const PointCloud& cloud, const TrainConfig& cfg) {
  GraphParams gp;
  gp.k = cfg.k;
  gp.eta = cfg.eta;
  return knn_weights(cloud, gp);
}

namespace detail {

struct SampleWork {
  EncoderGrads grads;
  double seg_ce_sum = 0.0;  // unnormalized masked cross-entropy
  double mil = 0.0;
  double sia = 0.0;
  double smo = 0.0;
};

}  // namespace detail

inline RunRecord train(const std::vector<TrainSample>& data, const TrainConfig& cfg,
                       const AblationFlags& flags, int threads = 1) {
  cfg.validate();
  if (data.empty()) throw ValidationError("train: empty dataset");
  const int num_samples = static_cast<int>(data.size());
  const int feat = data[0].cloud.feature_count();
  const int num_classes = data[0].cloud.num_classes;
  for (const auto& s : data) {
    s.cloud.validate();
    if (s.cloud.feature_count() != feat || s.cloud.num_classes != num_classes)
      throw ValidationError("train: samples disagree on feature count or class count");
    if (s.mask.size() != s.cloud.size())
      throw ValidationError("train: mask size does not match cloud");
  }

  const auto t0 = std::chrono::steady_clock::now();
  RunRecord record;
  record.config = cfg;
  record.flags = flags;

  EncoderParams params = init_params(cfg.seed, feat, num_classes, cfg.encoder_dims);

  std::vector<Matrix> onehots;
  onehots.reserve(data.size());
  for (const auto& s : data) onehots.push_back(one_hot(s.cloud.labels, num_classes));

  // stage-2 graphs, built once per sample
  std::vector<AffinityGraph> graphs;
  if (flags.smooth && cfg.epochs_stage2 > 0) {
    graphs.resize(data.size());
    parallel_for(num_samples, threads, [&](int i) {
      graphs[static_cast<std::size_t>(i)] = build_training_graph(
          data[static_cast<std::size_t>(i)].cloud, data[static_cast<std::size_t>(i)].mask, cfg);
    });
  }

  const auto run_epoch = [&](int epoch, const AblationFlags& active) {
    std::vector<int> order(static_cast<std::size_t>(num_samples));
    std::iota(order.begin(), order.end(), 0);
    Rng order_rng = derive_rng(cfg.seed, {rng_tag::kBatchOrder, static_cast<std::uint64_t>(epoch)});
    order_rng.shuffle(order);

    double epoch_ce = 0.0, epoch_c = 0.0;
    double epoch_mil = 0.0, epoch_sia = 0.0, epoch_smo = 0.0;

    for (int start = 0; start < num_samples; start += cfg.batch_size) {
      const int batch_n = std::min(cfg.batch_size, num_samples - start);
      double batch_c = 0.0;
      for (int m = 0; m < batch_n; ++m) {
        const auto& s = data[static_cast<std::size_t>(order[static_cast<std::size_t>(start + m)])];
        batch_c += s.mask.count;
        if (active.siamese && cfg.seg_on_augmented) batch_c += s.mask.count;
      }

      std::vector<detail::SampleWork> work(static_cast<std::size_t>(batch_n));
      parallel_for(batch_n, threads, [&](int m) {
        const int idx = order[static_cast<std::size_t>(start + m)];
        const auto& sample = data[static_cast<std::size_t>(idx)];
        const Matrix& onehot = onehots[static_cast<std::size_t>(idx)];
        detail::SampleWork& w = work[static_cast<std::size_t>(m)];

        Tape tape;
        Logits z = forward(params, sample.cloud, &tape);
        Matrix dz = Matrix::Zero(z.rows(), z.cols());

        if (sample.mask.count > 0 && batch_c > 0) {
          w.seg_ce_sum = seg_loss(z, onehot, sample.mask, 1.0);
          dz += seg_loss_grad(z, onehot, sample.mask, batch_c);
        }
        if (active.mil && sample.mask.count > 0) {
          Vector ybar = sample_level_label(onehot, sample.mask);
          w.mil = mil_loss(z, ybar);
          dz += (cfg.lambda_mil / batch_n) * mil_loss_grad(z, ybar);
        }

        Tape aug_tape;
        Matrix dz_aug;
        if (active.siamese) {
          std::uint64_t tseed = derive_seed(cfg.seed, {rng_tag::kTransform,
                                                       static_cast<std::uint64_t>(epoch),
                                                       static_cast<std::uint64_t>(idx)});
          RigidTransform t = sample_transform(tseed);
          PointCloud augmented = apply_transform(sample.cloud, t);
          Logits z_aug = forward(params, augmented, &aug_tape);
          w.sia = siamese_loss(z, z_aug);
          auto [dza, dzb] = siamese_loss_grad(z, z_aug);
          dz += (cfg.lambda_sia / batch_n) * dza;
          dz_aug = (cfg.lambda_sia / batch_n) * dzb;
          if (cfg.seg_on_augmented && sample.mask.count > 0 && batch_c > 0) {
            w.seg_ce_sum += seg_loss(z_aug, onehot, sample.mask, 1.0);
            dz_aug += seg_loss_grad(z_aug, onehot, sample.mask, batch_c);
          }
        }
        if (active.smooth) {
          const AffinityGraph& g = graphs[static_cast<std::size_t>(idx)];
          w.smo = smooth_loss(z, g);
          dz += (cfg.lambda_smo / batch_n) * smooth_loss_grad(z, g);
        }

        w.grads = backward(params, tape, dz);
        if (active.siamese) w.grads.add_scaled(backward(params, aug_tape, dz_aug), 1.0);

        double check = w.seg_ce_sum + w.mil + w.sia + w.smo;
        if (!std::isfinite(check))
          throw SolverError("train: non-finite loss at epoch " + std::to_string(epoch) +
                            ", sample " + std::to_string(idx));
      });

      EncoderGrads total = zeros_like(params);
      for (int m = 0; m < batch_n; ++m) {
        total.add_scaled(work[static_cast<std::size_t>(m)].grads, 1.0);
        epoch_ce += work[static_cast<std::size_t>(m)].seg_ce_sum;
        epoch_mil += work[static_cast<std::size_t>(m)].mil;
        epoch_sia += work[static_cast<std::size_t>(m)].sia;
        epoch_smo += work[static_cast<std::size_t>(m)].smo;
      }
      epoch_c += batch_c;
      sgd_step(params, total, cfg.lr);
    }

    LossBreakdown epoch_loss = total_loss(
        epoch_c > 0 ? epoch_ce / epoch_c : 0.0, epoch_mil / num_samples,
        epoch_sia / num_samples, epoch_smo / num_samples, cfg);
    record.epoch_losses.push_back(epoch_loss);
  };

  for (int e = 0; e < cfg.epochs_stage1; ++e) run_epoch(e, AblationFlags::all_off());
  for (int e = 0; e < cfg.epochs_stage2; ++e) run_epoch(cfg.epochs_stage1 + e, flags);

  record.final_params = std::move(params);
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return record;
}

// transductive_masks, when supplied, adds Eq.-8-style link constraints from
// known test labels to each inference graph before propagating.
inline EvalResult evaluate(const EncoderParams& params, const std::vector<TrainSample>& test,
                           const TrainConfig& cfg, bool use_propagation, int threads = 1,
                           AbsentClassPolicy policy = AbsentClassPolicy::Exclude,
                           const std::vector<LabelMask>* transductive_masks = nullptr) {
  if (test.empty()) throw ValidationError("evaluate: empty test set");
  if (transductive_masks && transductive_masks->size() != test.size())
    throw ValidationError("evaluate: transductive mask count mismatch");
  for (const auto& s : test)
    if (s.cloud.num_classes != params.num_classes)
      throw ValidationError("evaluate: dataset class count does not match the checkpoint");
  EvalResult result;
  result.per_sample.resize(test.size());
  std::vector<double> accs(test.size(), 0.0);

  parallel_for(static_cast<int>(test.size()), threads, [&](int i) {
    const auto& sample = test[static_cast<std::size_t>(i)];
    Logits z = forward(params, sample.cloud);
    std::vector<int> pred(static_cast<std::size_t>(z.rows()));
    if (use_propagation) {
      AffinityGraph g = build_inference_graph(sample.cloud, cfg);
      if (transductive_masks)
        g = apply_link_constraints(g, (*transductive_masks)[static_cast<std::size_t>(i)],
                                   sample.cloud.labels);
      PropagationResult prop = propagate(z, g, cfg.gamma, cfg.prop_tol);
      pred = prop.predicted;
    } else {
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < z.cols(); ++k)
          if (z(r, k) > z(r, best)) best = k;
        pred[static_cast<std::size_t>(r)] = static_cast<int>(best);
      }
    }
    result.per_sample[static_cast<std::size_t>(i)] =
        miou(pred, sample.cloud.labels, sample.cloud.num_classes, policy);
    accs[static_cast<std::size_t>(i)] = overall_accuracy(pred, sample.cloud.labels);
  });

  std::vector<std::pair<std::string, IoUReport>> tagged;
  tagged.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i)
    tagged.emplace_back(test[i].category, result.per_sample[i]);
  AggregateResult agg = aggregate(tagged);
  result.cat_avg = agg.cat_avg;
  result.samp_avg = agg.samp_avg;
  result.accuracy = std::accumulate(accs.begin(), accs.end(), 0.0) / accs.size();
  return result;
}

// ---------------------------------------------------------------------------
// Gradient-approximation study: how fast does the masked segmentation
// gradient approach the full one as the label count grows?
// ---------------------------------------------------------------------------

inline GradStudyResult grad_study(const std::vector<PointCloud>& clouds,
                                  const EncoderParams& params, const std::vector<int>& grid,
                                  int draws_per_n, std::uint64_t seed, int threads = 1) {
  if (clouds.empty()) throw ValidationError("grad_study: no clouds");
  if (draws_per_n < 30)
    throw ValidationError("grad_study: variance estimates need at least 30 draws per n");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1])
      throw ValidationError("grad_study: label counts must be strictly increasing");

  // per-point parameter gradients of the unnormalized cross-entropy
  int population = 0;
  for (const auto& c : clouds) population += c.size();
  for (int n : grid)
    if (n < 1 || n > population)
      throw ValidationError("grad_study: label count " + std::to_string(n) +
                            " outside [1, " + std::to_string(population) + "]");

  const std::int64_t p = params.param_count();
  Matrix point_grads(p, population);
  {
    int col0 = 0;
    for (const auto& cloud : clouds) {
      Tape tape;
      Logits z = forward(params, cloud, &tape);
      Matrix probs = softmax_rows(z);
      Matrix targets = one_hot(cloud.labels, cloud.num_classes);
      const int n = cloud.size();
      const int base = col0;
      parallel_for(n, threads, [&](int i) {
        Matrix dz = Matrix::Zero(z.rows(), z.cols());
        dz.row(i) = probs.row(i) - targets.row(i);
        point_grads.col(base + i) = backward(params, tape, dz).flatten();
      });
      col0 += n;
    }
  }

  Vector full_grad = Vector::Zero(p);
  for (int i = 0; i < population; ++i) full_grad += point_grads.col(i);
  full_grad /= static_cast<double>(population);

  GradStudyResult result;
  result.label_counts = grid;
  result.draws_per_n = draws_per_n;
  result.variances.assign(grid.size(), 0.0);

  parallel_for(static_cast<int>(grid.size()), threads, [&](int gi) {
    const int n = grid[static_cast<std::size_t>(gi)];
    Rng rng = derive_rng(seed, {rng_tag::kStudy, static_cast<std::uint64_t>(n)});
    Vector sum = Vector::Zero(p);
    Vector sumsq = Vector::Zero(p);
    for (int d = 0; d < draws_per_n; ++d) {
      std::vector<int> idx = rng.sample_without_replacement(population, n);
      std::sort(idx.begin(), idx.end());  // fixed summation order
      Vector masked = Vector::Zero(p);
      for (int i : idx) masked += point_grads.col(i);
      masked /= static_cast<double>(n);
      Vector diff = masked - full_grad;
      sum += diff;
      sumsq += diff.cwiseProduct(diff);
    }
    // unbiased per-parameter variance, then the mean over parameters
    Vector var = (sumsq - sum.cwiseProduct(sum) / draws_per_n) / (draws_per_n - 1);
    result.variances[static_cast<std::size_t>(gi)] = var.mean();
  });

  // least-squares slope of log(var) against log(n), zero-variance points excluded
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (result.variances[i] <= 0) continue;
    double x = std::log(static_cast<double>(grid[i]));
    double y = std::log(result.variances[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  result.slope = (m >= 2) ? (m * sxy - sx * sy) / (m * sxx - sx * sx) : 0.0;
  return result;
}

// ---------------------------------------------------------------------------
// Fixed-budget labelling strategies and the labelled-amount sweep. Both run
// the segmentation-loss-only baseline so the comparison isolates the
// annotation scheme.
// ---------------------------------------------------------------------------

struct BudgetRow {
  BudgetSplit split;
  double cat_avg = 0.0;
  double samp_avg = 0.0;
};

inline std::vector<TrainSample> make_samples(const Dataset& ds, std::vector<LabelMask> masks) {
  if (masks.size() != ds.size()) throw ValidationError("make_samples: mask count mismatch");
  std::vector<TrainSample> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    out.push_back({ds.clouds[i], std::move(masks[i]), ds.categories[i]});
  return out;
}

inline std::vector<BudgetRow> budget_experiment(const Dataset& train_data, const Dataset& test_data,
                                                double total_budget,
                                                const std::vector<BudgetSplit>& splits,
                                                const TrainConfig& cfg, int threads = 1) {
  if (splits.empty()) throw ValidationError("budget_experiment: no splits");
  for (const auto& s : splits) {
    s.validate();
    if (std::abs(s.sample_fraction * s.point_fraction - total_budget) > 1e-9)
      throw ValidationError("budget_experiment: split does not multiply to the total budget");
  }
  std::vector<TrainSample> test;
  for (std::size_t i = 0; i < test_data.size(); ++i)
    test.push_back({test_data.clouds[i], LabelMask::none(test_data.clouds[i].size()),
                    test_data.categories[i]});

  std::vector<BudgetRow> rows;
  for (const auto& split : splits) {
    auto masks = split_budget(train_data.clouds, split, cfg.seed);
    RunRecord run = train(make_samples(train_data, std::move(masks)), cfg,
                          AblationFlags::all_off(), threads);
    EvalResult ev = evaluate(run.final_params, test, cfg, false, threads);
    rows.push_back({split, ev.cat_avg, ev.samp_avg});
  }
  return rows;
}

struct SweepRow {
  double fraction = 0.0;
  double cat_avg = 0.0;
  double samp_avg = 0.0;
};

inline std::vector<SweepRow> label_amount_sweep(const Dataset& train_data, const Dataset& test_data,
                                                const std::vector<double>& fractions,
                                                const TrainConfig& cfg, int threads = 1) {
  if (fractions.empty()) throw ValidationError("label_amount_sweep: no fractions");
  std::vector<TrainSample> test;
  for (std::size_t i = 0; i < test_data.size(); ++i)
    test.push_back({test_data.clouds[i], LabelMask::none(test_data.clouds[i].size()),
                    test_data.categories[i]});

  std::vector<SweepRow> rows;
  for (double f : fractions) {
    MaskScheme scheme = MaskScheme::fraction_uniform(f);
    std::vector<LabelMask> masks;
    for (std::size_t i = 0; i < train_data.size(); ++i)
      masks.push_back(sample_mask(train_data.clouds[i], scheme,
                                  derive_seed(cfg.seed, {rng_tag::kMask, i})));
    RunRecord run = train(make_samples(train_data, std::move(masks)), cfg,
                          AblationFlags::all_off(), threads);
    EvalResult ev = evaluate(run.final_params, test, cfg, false, threads);
    rows.push_back({f, ev.cat_avg, ev.samp_avg});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Run directory: config.txt, losses.csv, checkpoint.txt, metrics.json,
// manifest.txt.
// ---------------------------------------------------------------------------

inline void write_config(const TrainConfig& cfg, const AblationFlags& flags,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "k = " << cfg.k << '\n';
  out << "eta = " << detail::format_real(cfg.eta) << '\n';
  out << "gamma = " << detail::format_real(cfg.gamma) << '\n';
  out << "lambda_mil = " << detail::format_real(cfg.lambda_mil) << '\n';
  out << "lambda_sia = " << detail::format_real(cfg.lambda_sia) << '\n';
  out << "lambda_smo = " << detail::format_real(cfg.lambda_smo) << '\n';
  out << "lr = " << detail::format_real(cfg.lr) << '\n';
  out << "epochs_stage1 = " << cfg.epochs_stage1 << '\n';
  out << "epochs_stage2 = " << cfg.epochs_stage2 << '\n';
  out << "batch_size = " << cfg.batch_size << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "encoder_dims = " << cfg.encoder_dims[0] << ',' << cfg.encoder_dims[1] << ','
      << cfg.encoder_dims[2] << ',' << cfg.encoder_dims[3] << '\n';
  out << "seg_on_augmented = " << (cfg.seg_on_augmented ? 1 : 0) << '\n';
  out << "prop_tol = " << detail::format_real(cfg.prop_tol) << '\n';
  out << "train_constraints = "
      << (cfg.train_constraints == TrainConfig::TrainConstraints::Full
              ? "full"
              : (cfg.train_constraints == TrainConfig::TrainConstraints::None ? "none"
                                                                              : "mustlink"))
      << '\n';
  out << "use_mil = " << (flags.mil ? 1 : 0) << '\n';
  out << "use_siamese = " << (flags.siamese ? 1 : 0) << '\n';
  out << "use_smooth = " << (flags.smooth ? 1 : 0) << '\n';
}

inline void apply_config_line(TrainConfig& cfg, AblationFlags& flags, const std::string& key,
                              const std::string& value) {
  const auto as_double = [&]() { return std::stod(value); };
  const auto as_int = [&]() { return std::stoi(value); };
  const auto as_bool = [&]() { return value == "1" || value == "true"; };
  if (key == "k") cfg.k = as_int();
  else if (key == "eta") cfg.eta = as_double();
  else if (key == "gamma") cfg.gamma = as_double();
  else if (key == "lambda_mil") cfg.lambda_mil = as_double();
  else if (key == "lambda_sia") cfg.lambda_sia = as_double();
  else if (key == "lambda_smo") cfg.lambda_smo = as_double();
  else if (key == "lr") cfg.lr = as_double();
  else if (key == "epochs_stage1") cfg.epochs_stage1 = as_int();
  else if (key == "epochs_stage2") cfg.epochs_stage2 = as_int();
  else if (key == "batch_size") cfg.batch_size = as_int();
  else if (key == "seed") cfg.seed = std::stoull(value);
  else if (key == "encoder_dims") {
    std::vector<int> dims;
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ',')) dims.push_back(std::stoi(tok));
    cfg.encoder_dims = dims;
  } else if (key == "seg_on_augmented") cfg.seg_on_augmented = as_bool();
  else if (key == "prop_tol") cfg.prop_tol = as_double();
  else if (key == "train_constraints") {
    if (value == "mustlink") cfg.train_constraints = TrainConfig::TrainConstraints::MustLinkOnly;
    else if (value == "full") cfg.train_constraints = TrainConfig::TrainConstraints::Full;
    else if (value == "none") cfg.train_constraints = TrainConfig::TrainConstraints::None;
    else throw ValidationError("train_constraints must be mustlink, full or none");
  }
  else if (key == "use_mil") flags.mil = as_bool();
  else if (key == "use_siamese") flags.siamese = as_bool();
  else if (key == "use_smooth") flags.smooth = as_bool();
  else throw ValidationError("unknown config key: " + key);
}

inline void read_config(const std::string& path, TrainConfig& cfg, AblationFlags& flags) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw ValidationError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    apply_config_line(cfg, flags, key, value);
  }
}

// Metrics file: fixed keys cat_avg, samp_avg, per_class.
inline void write_metrics(const EvalResult& eval, int num_classes, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  Vector per_class = mean_per_class(eval.per_sample, num_classes);
  out << "{\n";
  out << "  \"cat_avg\": " << detail::format_real(eval.cat_avg) << ",\n";
  out << "  \"samp_avg\": " << detail::format_real(eval.samp_avg) << ",\n";
  out << "  \"per_class\": [";
  for (int k = 0; k < num_classes; ++k)
    out << (k ? ", " : "") << detail::format_real(per_class(k));
  out << "],\n";
  out << "  \"overall_accuracy\": " << detail::format_real(eval.accuracy) << "\n";
  out << "}\n";
  if (!out) throw IoError("write failed: " + path);
}

inline void save_run(const RunRecord& record, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_config(record.config, record.flags, (fs::path(dir) / "config.txt").string());

  std::ofstream csv(fs::path(dir) / "losses.csv");
  csv << "epoch,seg,mil,sia,smo,total\n";
  for (std::size_t e = 0; e < record.epoch_losses.size(); ++e) {
    const auto& l = record.epoch_losses[e];
    csv << e << ',' << detail::format_real(l.seg) << ',' << detail::format_real(l.mil) << ','
        << detail::format_real(l.sia) << ',' << detail::format_real(l.smo) << ','
        << detail::format_real(l.total) << '\n';
  }

  save_checkpoint(record.final_params, record.config.seed,
                  (fs::path(dir) / "checkpoint.txt").string());

  if (!record.eval.per_sample.empty())
    write_metrics(record.eval, record.final_params.num_classes,
                  (fs::path(dir) / "metrics.json").string());

  std::ofstream manifest(fs::path(dir) / "manifest.txt");
  manifest << "config.txt\nlosses.csv\ncheckpoint.txt\nmetrics.json\n";
}

}  // namespace pointseg
