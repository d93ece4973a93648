#include "loadcast/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "loadcast/csv.hpp"
#include "loadcast/error.hpp"
#include "loadcast/stats.hpp"

namespace loadcast {

void run_parallel(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& task) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (unsigned w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------- horizon

const HorizonCell* HorizonReport::find(const std::string& model, int d) const {
  for (const auto& c : cells)
    if (c.model == model && c.d == d) return &c;
  return nullptr;
}

HorizonReport horizon_analysis(const ModelPredictions& models, int min_d, int max_d) {
  if (min_d > max_d) throw Error(ErrorCode::InvalidConfig, "empty horizon range");
  HorizonReport rep;
  rep.min_d = min_d;
  rep.max_d = max_d;
  for (const auto& [name, preds] : models) {
    for (int d = min_d; d <= max_d; ++d) {
      std::vector<Prediction> slice;
      for (const auto& p : preds)
        if (p.d == d) slice.push_back(p);
      HorizonCell cell{name, d, slice.size(), std::nullopt};
      if (!slice.empty()) cell.metrics = compute_metrics(slice);
      rep.cells.push_back(std::move(cell));
    }
  }
  return rep;
}

namespace {

void write_metric_columns(std::ostream& out, const std::optional<MetricSet>& m) {
  if (!m) {
    out << ",,,,,,,";
    return;
  }
  out << ',' << csv::format(m->mae) << ',' << csv::format(m->mape) << ',' << csv::format(m->mse) << ','
      << csv::format(m->rmse) << ',' << csv::format(m->mase) << ',' << csv::format(m->r2) << ','
      << m->mape_excluded;
}

constexpr const char* kMetricHeader = "mae,mape,mse,rmse,mase,r2,mape_excluded";
constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#17becf"};

double pick(const MetricSet& m, const std::string& metric) {
  if (metric == "mae") return m.mae;
  if (metric == "r2") return m.r2;
  if (metric == "mape") return m.mape;
  if (metric == "rmse") return m.rmse;
  if (metric == "mase") return m.mase;
  if (metric == "mse") return m.mse;
  throw Error(ErrorCode::InvalidConfig, "unknown metric " + metric);
}

std::string fmt(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

}  // namespace

void write_horizon_csv(std::ostream& out, const HorizonReport& report) {
  out << "model,d,n," << kMetricHeader << '\n';
  for (const auto& c : report.cells) {
    out << c.model << ',' << c.d << ',' << c.n;
    write_metric_columns(out, c.metrics);
    out << '\n';
  }
}

void write_horizon_svg(std::ostream& out, const HorizonReport& report, const std::string& metric) {
  constexpr double W = 720, Ht = 400, L = 60, R = 160, T = 30, B = 50;
  std::vector<std::string> models;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& c : report.cells) {
    if (std::find(models.begin(), models.end(), c.model) == models.end()) models.push_back(c.model);
    if (c.metrics && std::isfinite(pick(*c.metrics, metric))) {
      lo = std::min(lo, pick(*c.metrics, metric));
      hi = std::max(hi, pick(*c.metrics, metric));
    }
  }
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  if (hi - lo < 1e-12) hi = lo + 1;
  const double span_d = std::max(1, report.max_d - report.min_d);
  // Departure (d = 0) sits at the right edge.
  auto x_of = [&](int d) { return L + (W - L - R) * (report.max_d - d) / span_d; };
  auto y_of = [&](double v) { return T + (Ht - T - B) * (hi - v) / (hi - lo); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Ht << "\">\n";
  out << "<desc>\n";
  write_horizon_csv(out, report);
  out << "</desc>\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << Ht - B << "\" x2=\"" << W - R << "\" y2=\"" << Ht - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << Ht - B << "\" stroke=\"black\"/>\n";
  for (int d = report.max_d; d >= report.min_d; --d)
    if ((report.max_d - d) % 3 == 0 || d == report.min_d)
      out << "<text x=\"" << fmt(x_of(d)) << "\" y=\"" << Ht - B + 18
          << "\" font-size=\"11\" text-anchor=\"middle\">D-" << d << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    out << "<text x=\"" << L - 6 << "\" y=\"" << fmt(y_of(v) + 4) << "\" font-size=\"11\" text-anchor=\"end\">"
        << fmt(v) << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << Ht - 12
      << "\" font-size=\"12\" text-anchor=\"middle\">days before departure</text>\n";
  out << "<text x=\"14\" y=\"" << T - 10 << "\" font-size=\"12\">" << metric << "</text>\n";
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto* color = kPalette[m % kPalette.size()];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (const auto& c : report.cells) {
      if (c.model != models[m] || !c.metrics || !std::isfinite(pick(*c.metrics, metric))) continue;
      out << (first ? "" : " ") << fmt(x_of(c.d)) << ',' << fmt(y_of(pick(*c.metrics, metric)));
      first = false;
    }
    out << "\"/>\n";
    const double ly = T + 16.0 * static_cast<double>(m);
    out << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << models[m] << "</text>\n";
  }
  out << "</svg>\n";
}

// ---------------------------------------------------------------- categories

std::vector<CategoryCell> category_report(const ModelPredictions& models, const std::vector<RouteMeta>& routes) {
  std::map<std::string, const RouteMeta*> meta;
  for (const auto& r : routes) meta[r.route_id] = &r;
  struct Pair {
    const char* name;
    std::vector<std::string> tags;
    std::function<std::string(const RouteMeta&)> tag_of;
  };
  const std::vector<Pair> pairs{
      {"reach", {"domestic", "international"}, [](const RouteMeta& m) { return to_string(m.reach); }},
      {"service", {"direct", "transit"}, [](const RouteMeta& m) { return to_string(m.service); }},
      {"frequency", {"high_freq", "low_freq"}, [](const RouteMeta& m) { return to_string(m.frequency); }},
      {"haul", {"short", "mid", "long"}, [](const RouteMeta& m) { return to_string(m.haul); }},
  };
  std::vector<CategoryCell> out;
  for (const auto& [name, preds] : models) {
    for (const auto& p : preds)
      if (!meta.count(p.route_id)) throw Error(ErrorCode::UnknownRoute, "no metadata for route " + p.route_id);
    for (const auto& pair : pairs) {
      for (const auto& tag : pair.tags) {
        std::vector<Prediction> slice;
        for (const auto& p : preds)
          if (pair.tag_of(*meta[p.route_id]) == tag) slice.push_back(p);
        CategoryCell cell{pair.name, tag, name, slice.size(), std::nullopt};
        if (!slice.empty()) cell.metrics = compute_metrics(slice);
        out.push_back(std::move(cell));
      }
    }
  }
  return out;
}

void write_categories_csv(std::ostream& out, const std::vector<CategoryCell>& cells) {
  out << "model,pair,tag,n," << kMetricHeader << '\n';
  for (const auto& c : cells) {
    out << c.model << ',' << c.pair << ',' << c.tag << ',' << c.n;
    write_metric_columns(out, c.metrics);
    out << '\n';
  }
}

void write_categories_svg(std::ostream& out, const std::vector<CategoryCell>& cells, const std::string& metric) {
  // Grouped bars: one group per (pair, tag), one bar per model.
  std::vector<std::string> models, groups;
  double hi = 0;
  for (const auto& c : cells) {
    if (std::find(models.begin(), models.end(), c.model) == models.end()) models.push_back(c.model);
    const auto g = c.pair + ":" + c.tag;
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    if (c.metrics && std::isfinite(pick(*c.metrics, metric))) hi = std::max(hi, std::abs(pick(*c.metrics, metric)));
  }
  if (hi <= 0) hi = 1;
  constexpr double L = 60, T = 30, B = 70, Ht = 400, group_w = 70;
  const double W = L + group_w * static_cast<double>(groups.size()) + 170;
  const double bar_w = (group_w - 10) / static_cast<double>(std::max<std::size_t>(1, models.size()));
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Ht << "\">\n<desc>\n";
  write_categories_csv(out, cells);
  out << "</desc>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << Ht - B << "\" x2=\"" << W - 170 << "\" y2=\"" << Ht - B
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"14\" y=\"" << T - 10 << "\" font-size=\"12\">" << metric << " (max " << fmt(hi) << ")</text>\n";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = L + group_w * static_cast<double>(g) + 5;
    out << "<text x=\"" << fmt(gx + group_w / 2 - 5) << "\" y=\"" << Ht - B + 16
        << "\" font-size=\"10\" text-anchor=\"middle\">" << groups[g] << "</text>\n";
    for (const auto& c : cells) {
      if (c.pair + ":" + c.tag != groups[g] || !c.metrics) continue;
      const double v = pick(*c.metrics, metric);
      if (!std::isfinite(v)) continue;
      const auto m = static_cast<std::size_t>(std::find(models.begin(), models.end(), c.model) - models.begin());
      const double h = (Ht - T - B) * std::abs(v) / hi;
      out << "<rect x=\"" << fmt(gx + bar_w * static_cast<double>(m)) << "\" y=\"" << fmt(Ht - B - h) << "\" width=\""
          << fmt(bar_w) << "\" height=\"" << fmt(h) << "\" fill=\"" << kPalette[m % kPalette.size()] << "\"/>\n";
    }
  }
  for (std::size_t m = 0; m < models.size(); ++m) {
    const double ly = T + 16.0 * static_cast<double>(m);
    out << "<rect x=\"" << W - 160 << "\" y=\"" << ly - 8 << "\" width=\"12\" height=\"10\" fill=\""
        << kPalette[m % kPalette.size()] << "\"/>\n<text x=\"" << W - 142 << "\" y=\"" << ly + 1
        << "\" font-size=\"11\">" << models[m] << "</text>\n";
  }
  out << "</svg>\n";
}

// ---------------------------------------------------------------- baselines

std::string to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::Linear: return "linear";
    case BaselineKind::Ridge: return "ridge";
    case BaselineKind::RandomForest: return "random_forest";
    case BaselineKind::Naive: return "naive";
  }
  return "?";
}

BaselineKind baseline_from_name(const std::string& name) {
  for (auto k : {BaselineKind::Linear, BaselineKind::Ridge, BaselineKind::RandomForest, BaselineKind::Naive})
    if (to_string(k) == name) return k;
  throw Error(ErrorCode::InvalidConfig, "unknown baseline '" + name + "'");
}

Matrix flatten(const std::vector<SequenceSample>& samples) {
  if (samples.empty()) return Matrix(0, 0);
  const auto width = samples.front().horizontal.size() + samples.front().vertical.size();
  Matrix x(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const auto& s = samples[r];
    if (s.horizontal.size() + s.vertical.size() != width)
      throw Error(ErrorCode::ShapeMismatch, "samples disagree on window shapes");
    std::size_t c = 0;
    for (double v : s.horizontal.data()) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c++)) = v;
    for (double v : s.vertical.data()) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c++)) = v;
  }
  return x;
}

BaselineResult baseline_fit_predict(BaselineKind kind, const SplitCorpus& corpus, const BaselineConfig& cfg,
                                    std::uint64_t seed) {
  if (corpus.test.empty()) throw Error(ErrorCode::EmptyPartition, "no test samples");
  BaselineResult res;
  std::vector<double> pred(corpus.test.size());
  if (kind == BaselineKind::Naive) {
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = corpus.test[i].naive_plf;
  } else {
    if (corpus.train.empty()) throw Error(ErrorCode::EmptyPartition, "no training samples");
    const Matrix x = flatten(corpus.train);
    const Matrix xt = flatten(corpus.test);
    std::vector<double> y;
    for (const auto& s : corpus.train) y.push_back(s.target_plf);
    if (kind == BaselineKind::RandomForest) {
      auto fc = cfg.forest;
      fc.seed = seed;
      RandomForest rf(fc);
      rf.fit(x, y);
      pred = rf.predict(xt);
    } else {
      const auto model = kind == BaselineKind::Linear ? stats::least_squares_fit(x, y)
                                                      : stats::ridge_fit(x, y, cfg.ridge_lambda);
      if (model.singular_fallback)
        res.warnings.push_back("SingularSystem: collinear design, fell back to ridge 1e-8");
      pred = model.predict(xt);
    }
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto& s = corpus.test[i];
    res.predictions.push_back({s.route_id, s.flight_date, s.days_before_departure, s.target_plf, s.naive_plf, pred[i]});
  }
  res.metrics = compute_metrics(res.predictions);
  return res;
}

// ---------------------------------------------------------------- leaderboard

LeaderboardResult leaderboard(const SplitCorpus& corpus, const LeaderboardConfig& cfg) {
  if (cfg.seeds.empty()) throw Error(ErrorCode::InvalidConfig, "leaderboard needs at least one seed");
  const auto train = to_sequence_data(corpus.train, corpus.scaler);
  const auto val = to_sequence_data(corpus.validation, corpus.scaler);
  const auto test = to_sequence_data(corpus.test, corpus.scaler);

  struct Task {
    std::string model;
    std::optional<Variant> variant;
    std::optional<BaselineKind> baseline;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  std::vector<std::string> order;
  for (auto v : cfg.variants) {
    order.push_back(to_string(v));
    for (auto s : cfg.seeds) tasks.push_back({to_string(v), v, std::nullopt, s});
  }
  for (auto b : cfg.baselines) {
    order.push_back(to_string(b));
    for (auto s : cfg.seeds) tasks.push_back({to_string(b), std::nullopt, b, s});
  }
  std::vector<MetricSet> metrics(tasks.size());
  std::vector<std::vector<Prediction>> preds(tasks.size());
  std::mutex hook_mutex;
  const int fh = corpus.train.empty() ? 0 : static_cast<int>(corpus.train.front().horizontal.dim(1));
  const int fv = corpus.train.empty() ? 0 : static_cast<int>(corpus.train.front().vertical.dim(1));
  const int hs = corpus.train.empty() ? 0 : static_cast<int>(corpus.train.front().horizontal.dim(0));
  const int vs = corpus.train.empty() ? 0 : static_cast<int>(corpus.train.front().vertical.dim(0));

  run_parallel(tasks.size(), cfg.jobs, [&](std::size_t i) {
    const auto& task = tasks[i];
    if (task.baseline) {
      auto r = baseline_fit_predict(*task.baseline, corpus, cfg.baseline, task.seed);
      metrics[i] = r.metrics;
      preds[i] = std::move(r.predictions);
      return;
    }
    auto tc = cfg.train;
    tc.seed = task.seed;
    auto fitted = fit(reference_spec(*task.variant, fh, fv, hs, vs), train, val, tc);
    const Vector z = predict(*fitted.model, test);
    for (std::size_t k = 0; k < corpus.test.size(); ++k) {
      const auto& s = corpus.test[k];
      preds[i].push_back({s.route_id, s.flight_date, s.days_before_departure, s.target_plf, s.naive_plf,
                          corpus.scaler.unscale_target(z[static_cast<Eigen::Index>(k)])});
    }
    metrics[i] = compute_metrics(preds[i]);
    if (cfg.on_fit) {
      std::lock_guard lock(hook_mutex);
      cfg.on_fit(task.model, task.seed, *fitted.model, fitted.log);
    }
  });

  LeaderboardResult res;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    res.runs[tasks[i].model].push_back(metrics[i]);
    res.predictions[tasks[i].model].push_back(std::move(preds[i]));
  }
  for (const auto& name : order) res.rows.push_back(summarize(name, res.runs[name]));
  return res;
}

// ---------------------------------------------------------------- sweep

std::vector<SweepRow> window_sweep(const FeatureTable& table, const SweepConfig& cfg) {
  std::vector<std::pair<int, int>> pairs;
  for (int h : cfg.sizes) {
    if (h < 1) throw Error(ErrorCode::InvalidConfig, "window sizes must be positive");
    if (cfg.symmetric) pairs.emplace_back(h, h);
    else
      for (int v : cfg.sizes) pairs.emplace_back(h, v);
  }
  std::vector<SweepRow> rows;
  for (const auto& [h, v] : pairs) {
    auto seq = cfg.sequences;
    seq.horizontal_window = h;
    seq.vertical_window = v;
    auto corpus = chronological_split(assemble_samples(table, seq).samples);
    const auto train = to_sequence_data(corpus.train, corpus.scaler);
    const auto val = to_sequence_data(corpus.validation, corpus.scaler);
    const auto total = corpus.train.size() + corpus.validation.size() + corpus.test.size();
    std::vector<SweepRow> block(cfg.architectures.size());
    run_parallel(cfg.architectures.size(), cfg.jobs, [&](std::size_t i) {
      const auto spec = reference_spec(cfg.architectures[i], static_cast<int>(seq.horizontal_features.size()),
                                       static_cast<int>(seq.vertical_features.size()), h, v);
      const auto fitted = fit(spec, train, val, cfg.train);
      const double sd = corpus.scaler.target_std;
      block[i] = {to_string(cfg.architectures[i]), h, v, fitted.log.best_val_loss,
                  fitted.log.best_val_loss * sd * sd, fitted.log.stopped_epoch, total};
    });
    rows.insert(rows.end(), block.begin(), block.end());
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  // Ranked by validation loss within each architecture.
  std::vector<std::size_t> idx(rows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
    if (rows[a].architecture != rows[b].architecture) return rows[a].architecture < rows[b].architecture;
    return rows[a].val_mse_plf < rows[b].val_mse_plf;
  });
  out << "architecture,rank,H,V,val_loss,val_mse_plf,epochs,samples\n";
  std::string current;
  int rank = 0;
  for (auto i : idx) {
    const auto& r = rows[i];
    if (r.architecture != current) current = r.architecture, rank = 0;
    out << r.architecture << ',' << ++rank << ',' << r.horizontal_window << ',' << r.vertical_window << ','
        << csv::format(r.val_loss) << ',' << csv::format(r.val_mse_plf) << ',' << r.epochs << ',' << r.samples
        << '\n';
  }
}

const SweepRow& sweep_winner(const std::vector<SweepRow>& rows) {
  if (rows.empty()) throw Error(ErrorCode::EmptyPartition, "sweep produced no rows");
  const SweepRow* best = &rows.front();
  for (const auto& r : rows)
    if (r.val_mse_plf < best->val_mse_plf) best = &r;
  return *best;
}

KeyValueConfig winner_config(const SweepRow& row) {
  KeyValueConfig kv;
  kv.set("sequences.horizontal_window", std::to_string(row.horizontal_window));
  kv.set("sequences.vertical_window", std::to_string(row.vertical_window));
  return kv;
}

}  // namespace loadcast
