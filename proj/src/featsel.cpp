#include "loadcast/featsel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "loadcast/error.hpp"
#include "loadcast/stats.hpp"

namespace loadcast::featsel {

SuffixedName parse_suffix(const std::string& name) {
  const auto pos = name.rfind('_');
  if (pos != std::string::npos && pos + 2 < name.size()) {
    const char stream = name[pos + 1];
    const auto digits = name.substr(pos + 2);
    if ((stream == 'H' || stream == 'V') && !digits.empty() &&
        std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
      return {name.substr(0, pos), stream, std::stoi(digits)};
  }
  return {name, 0, 0};
}

const std::vector<std::string>& shared_core() {
  static const std::vector<std::string> core = {"plf", "total_RPK", "rolling_avg_plf", "plf_historical",
                                                "days_before_departure"};
  return core;
}

bool is_shared_core(const std::string& base) {
  const auto& core = shared_core();
  return std::find(core.begin(), core.end(), base) != core.end();
}

Priority domain_priority(const std::string& name) {
  const auto parsed = parse_suffix(name);
  const auto feature = feature_from_name(parsed.base);
  if (!feature) return {3, std::numeric_limits<std::size_t>::max(), parsed.offset};
  const auto order = index(*feature);
  int tier = 2;
  if (is_shared_core(parsed.base)) tier = 0;
  else if (order < 12) tier = 1;  // the remaining published model inputs
  return {tier, order, parsed.offset};
}

namespace {

std::vector<Feature> eligible(bool horizontal) {
  std::vector<Feature> out;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const auto f = static_cast<Feature>(i);
    const auto tag = stream_tag(f);
    if (tag == StreamTag::Shared || (horizontal ? tag == StreamTag::Horizontal : tag == StreamTag::Vertical))
      out.push_back(f);
  }
  return out;
}

std::vector<double> column(const Dataset& d, std::size_t c) {
  std::vector<double> out(static_cast<std::size_t>(d.x.rows()));
  for (Eigen::Index r = 0; r < d.x.rows(); ++r) out[static_cast<std::size_t>(r)] = d.x(r, static_cast<Eigen::Index>(c));
  return out;
}

Dataset select_columns(const Dataset& d, const std::vector<std::string>& keep) {
  Dataset out;
  out.y = d.y;
  out.names = keep;
  out.x.resize(d.x.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto it = std::find(d.names.begin(), d.names.end(), keep[k]);
    if (it == d.names.end()) throw Error(ErrorCode::MissingColumn, "no candidate column " + keep[k]);
    out.x.col(static_cast<Eigen::Index>(k)) = d.x.col(it - d.names.begin());
  }
  return out;
}

}  // namespace

SelectionData make_selection_data(const FeatureTable& table, const SequenceConfig& cfg, std::size_t max_rows) {
  const FlightIndex flights(table);
  const auto h_features = eligible(true);
  const auto v_features = eligible(false);

  struct RowRef {
    Date date;
    std::string route;
    int d;
    std::vector<long> h_rows;
    std::vector<long> v_rows;
    double target;
  };
  std::vector<RowRef> refs;
  for (const auto& route : flights.routes()) {
    for (const auto& [date, offsets] : *flights.route(route)) {
      if (offsets[0] < 0) continue;
      for (int d = cfg.max_offset; d >= cfg.min_offset; --d) {
        if (d < 0 || d > FlightIndex::kMaxOffset || offsets[static_cast<std::size_t>(d)] < 0) continue;
        RowRef ref{date, route, d, {}, {}, table.rows[static_cast<std::size_t>(offsets[0])][Feature::plf]};
        bool ok = true;
        for (int k = 1; k <= cfg.horizontal_window && ok; ++k) {
          const int off = d + k - 1;
          const long r = off <= FlightIndex::kMaxOffset ? offsets[static_cast<std::size_t>(off)] : -1;
          ok = r >= 0;
          ref.h_rows.push_back(r);
        }
        if (!ok) continue;
        std::vector<Date> hist;
        try {
          hist = vertical_flights(flights, route, date, d, cfg.vertical_window, cfg.stride);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::InsufficientHistory) throw;
          continue;
        }
        // V1 is the most recent historical flight.
        for (auto it = hist.rbegin(); it != hist.rend(); ++it)
          ref.v_rows.push_back((*flights.flight(route, *it))[static_cast<std::size_t>(d)]);
        refs.push_back(std::move(ref));
      }
    }
  }
  std::stable_sort(refs.begin(), refs.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
  if (max_rows > 0 && refs.size() > max_rows) {
    std::vector<RowRef> thinned;
    thinned.reserve(max_rows);
    for (std::size_t i = 0; i < max_rows; ++i) thinned.push_back(refs[i * refs.size() / max_rows]);
    refs = std::move(thinned);
  }

  auto build = [&](bool horizontal) {
    Dataset ds;
    const auto& feats = horizontal ? h_features : v_features;
    const int lags = horizontal ? cfg.horizontal_window : cfg.vertical_window;
    for (auto f : feats)
      for (int k = 1; k <= lags; ++k)
        ds.names.push_back(std::string(feature_names()[index(f)]) + (horizontal ? "_H" : "_V") + std::to_string(k));
    ds.x.resize(static_cast<Eigen::Index>(refs.size()), static_cast<Eigen::Index>(ds.names.size()));
    for (std::size_t r = 0; r < refs.size(); ++r) {
      const auto& rows = horizontal ? refs[r].h_rows : refs[r].v_rows;
      Eigen::Index c = 0;
      for (auto f : feats)
        for (int k = 1; k <= lags; ++k)
          ds.x(static_cast<Eigen::Index>(r), c++) = table.rows[static_cast<std::size_t>(rows[static_cast<std::size_t>(k - 1)])][f];
      ds.y.push_back(refs[r].target);
    }
    return ds;
  };
  return {build(true), build(false)};
}

Stage1Result stage1_pearson_prune(const Dataset& data, double threshold) {
  const auto p = static_cast<std::size_t>(data.x.cols());
  if (data.x.rows() < 2) throw Error(ErrorCode::InvalidConfig, "stage 1 needs at least 2 rows");
  Stage1Result res;

  Matrix z = data.x.rowwise() - data.x.colwise().mean();
  std::vector<bool> constant(p, false);
  for (std::size_t c = 0; c < p; ++c) {
    const double norm = z.col(static_cast<Eigen::Index>(c)).norm();
    if (norm <= 1e-12 * std::max(1.0, data.x.col(static_cast<Eigen::Index>(c)).cwiseAbs().maxCoeff()) || norm == 0) {
      constant[c] = true;
      z.col(static_cast<Eigen::Index>(c)).setZero();
    } else {
      z.col(static_cast<Eigen::Index>(c)) /= norm;
    }
  }
  res.correlation = z.transpose() * z;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      auto& v = res.correlation(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (constant[i] || constant[j]) v = std::numeric_limits<double>::quiet_NaN();
      else v = std::clamp(v, -1.0, 1.0);
    }

  std::vector<bool> dropped(p, false);
  for (std::size_t c = 0; c < p; ++c)
    if (constant[c]) {
      dropped[c] = true;
      res.dropped.push_back({data.names[c], 1, "ConstantColumn: correlation undefined"});
    }

  struct Pair {
    std::size_t i, j;
    double r;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) {
      const double r = res.correlation(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (!std::isnan(r) && std::abs(r) > threshold) pairs.push_back({i, j, r});
    }
  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return std::abs(a.r) > std::abs(b.r); });

  for (const auto& pr : pairs) {
    if (dropped[pr.i] || dropped[pr.j]) continue;
    const auto& a = data.names[pr.i];
    const auto& b = data.names[pr.j];
    if (is_shared_core(parse_suffix(a).base) && is_shared_core(parse_suffix(b).base)) {
      res.pairs.push_back({a + "," + b, "", pr.r});
      continue;
    }
    const bool drop_b = domain_priority(a) < domain_priority(b);
    const auto loser = drop_b ? pr.j : pr.i;
    const auto& kept = drop_b ? a : b;
    dropped[loser] = true;
    res.pairs.push_back({kept, data.names[loser], pr.r});
    res.dropped.push_back({data.names[loser], 1,
                           "|r| = " + std::to_string(std::abs(pr.r)) + " > " + std::to_string(threshold) +
                               " with " + kept + " (less domain-relevant)"});
  }
  for (std::size_t c = 0; c < p; ++c)
    if (!dropped[c]) res.survivors.push_back(data.names[c]);
  return res;
}

std::map<std::string, double> stage2_mutual_information(const Dataset& data, int bins) {
  std::map<std::string, double> out;
  for (std::size_t c = 0; c < data.names.size(); ++c)
    out[data.names[c]] = stats::mutual_information(column(data, c), data.y, bins);
  return out;
}

std::map<std::string, double> stage3_rf_importance(const Dataset& data, const ForestConfig& forest) {
  RandomForest rf(forest);
  rf.fit(data.x, data.y);
  std::map<std::string, double> out;
  for (std::size_t c = 0; c < data.names.size(); ++c) out[data.names[c]] = rf.importances()[c];
  return out;
}

SfsResult stage4_sfs_ridge(const Dataset& data, std::size_t max_k, double lambda, double min_gain, double holdout) {
  SfsResult res;
  const auto n = static_cast<std::size_t>(data.x.rows());
  const auto p = static_cast<std::size_t>(data.x.cols());
  const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(holdout * static_cast<double>(n))));
  if (n < n_val + 2) throw Error(ErrorCode::InvalidConfig, "SFS needs more rows than the holdout");
  const auto n_fit = n - n_val;

  // Standardise with fit-part statistics.
  const auto fit_rows = data.x.topRows(static_cast<Eigen::Index>(n_fit));
  const RowVector mu = fit_rows.colwise().mean();
  RowVector sd = ((fit_rows.rowwise() - mu).array().square().colwise().sum() / static_cast<double>(n_fit)).sqrt();
  for (Eigen::Index c = 0; c < sd.size(); ++c)
    if (sd[c] <= 0) sd[c] = 1.0;
  const Eigen::MatrixXd z = ((data.x.rowwise() - mu).array().rowwise() / sd.array()).matrix();
  const Eigen::MatrixXd z_fit = z.topRows(static_cast<Eigen::Index>(n_fit));
  const Eigen::MatrixXd z_val = z.bottomRows(static_cast<Eigen::Index>(n_val));
  // Owned copy: reductions over a foreign buffer peel by address, which breaks replay.
  const Vector y_all = Eigen::Map<const Vector>(data.y.data(), static_cast<Eigen::Index>(n));
  const double y_mean = y_all.head(static_cast<Eigen::Index>(n_fit)).mean();
  const Vector y_fit = y_all.head(static_cast<Eigen::Index>(n_fit)).array() - y_mean;
  const Vector y_val = y_all.tail(static_cast<Eigen::Index>(n_val));
  const double sst = (y_val.array() - y_val.mean()).square().sum();

  // z_fit has exactly zero column means, so the intercept is y_mean.
  const Eigen::MatrixXd gram = z_fit.transpose() * z_fit;
  const Vector xty = z_fit.transpose() * y_fit;

  auto score = [&](const std::vector<std::size_t>& cols) {
    const auto k = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd a(k, k);
    Vector b(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      b[i] = xty[static_cast<Eigen::Index>(cols[static_cast<std::size_t>(i)])];
      for (Eigen::Index j = 0; j < k; ++j)
        a(i, j) = gram(static_cast<Eigen::Index>(cols[static_cast<std::size_t>(i)]),
                       static_cast<Eigen::Index>(cols[static_cast<std::size_t>(j)]));
    }
    a.diagonal().array() += lambda;
    const Vector beta = a.ldlt().solve(b);
    double sse = 0;
    for (std::size_t r = 0; r < n_val; ++r) {
      double pred = y_mean;
      for (Eigen::Index i = 0; i < k; ++i)
        pred += beta[i] * z_val(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cols[static_cast<std::size_t>(i)]));
      const double e = y_val[static_cast<Eigen::Index>(r)] - pred;
      sse += e * e;
    }
    return sst > 0 ? 1.0 - sse / sst : 0.0;
  };

  std::vector<std::size_t> selected;
  std::vector<bool> used(p, false);
  double current = score({});
  res.stop_reason = "no candidates";
  while (selected.size() < max_k) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_c = p;
    for (std::size_t c = 0; c < p; ++c) {
      if (used[c]) continue;
      auto trial = selected;
      trial.push_back(c);
      const double s = score(trial);
      if (s > best + 1e-15) {
        best = s;
        best_c = c;
      }
    }
    if (best_c == p) {
      res.stop_reason = "candidates exhausted";
      break;
    }
    if (best - current < min_gain) {
      res.stop_reason = "marginal gain below threshold";
      break;
    }
    used[best_c] = true;
    selected.push_back(best_c);
    current = best;
    res.order.push_back({data.names[best_c], best});
  }
  if (selected.size() >= max_k) res.stop_reason = "reached max_k";
  return res;
}

std::map<std::string, double> stage5_vif(const Dataset& data) {
  const auto v = stats::variance_inflation(data.x);
  std::map<std::string, double> out;
  for (std::size_t c = 0; c < data.names.size(); ++c) out[data.names[c]] = v[c];
  return out;
}

std::vector<DedupEntry> stage6_dedup(const std::vector<std::string>& selected) {
  std::vector<std::string> bases;
  std::map<std::string, std::map<std::string, int>> counts;
  for (const auto& name : selected) {
    const auto parsed = parse_suffix(name);
    if (!counts.count(parsed.base)) bases.push_back(parsed.base);
    ++counts[parsed.base][name];
  }
  std::vector<DedupEntry> out;
  for (const auto& base : bases) {
    const auto& variants = counts[base];
    const std::string* best = nullptr;
    int best_votes = -1;
    for (const auto& [name, votes] : variants) {
      bool better = votes > best_votes;
      if (!better && votes == best_votes) {
        const auto a = parse_suffix(name), b = parse_suffix(*best);
        // Smaller offset first; at equal offsets H precedes V (and both precede unsuffixed).
        auto rank = [](char s) { return s == 'H' ? 0 : s == 'V' ? 1 : 2; };
        better = std::pair(a.offset, rank(a.stream)) < std::pair(b.offset, rank(b.stream));
      }
      if (better) {
        best = &name;
        best_votes = votes;
      }
    }
    out.push_back({base, *best, best_votes});
  }
  return out;
}

std::vector<std::string> borda_aggregate(const std::vector<std::string>& candidates,
                                         const std::vector<std::vector<std::string>>& rankings) {
  const std::size_t n = candidates.size();
  std::map<std::string, double> points;
  for (const auto& c : candidates) points[c] = 0.0;
  for (const auto& ranking : rankings) {
    std::vector<std::string> listed;
    for (const auto& name : ranking)
      if (points.count(name) && std::find(listed.begin(), listed.end(), name) == listed.end()) listed.push_back(name);
    // Listed names get n-1, n-2, ... points; unlisted names share the mean of
    // the remaining positions.
    for (std::size_t pos = 0; pos < listed.size(); ++pos)
      points[listed[pos]] += static_cast<double>(n - 1 - pos);
    const std::size_t missing = n - listed.size();
    if (missing > 0) {
      const double share = static_cast<double>(missing - 1) / 2.0;
      for (const auto& c : candidates)
        if (std::find(listed.begin(), listed.end(), c) == listed.end()) points[c] += share;
    }
  }
  auto out = candidates;
  std::stable_sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    if (points[a] != points[b]) return points[a] > points[b];
    return domain_priority(a) < domain_priority(b);
  });
  return out;
}

FinalSplit stage7_final_split(const std::vector<std::string>& ranked, std::size_t h_target, std::size_t v_target) {
  FinalSplit out;
  for (const auto& base : ranked) {
    const auto f = feature_from_name(base);
    const auto tag = f ? stream_tag(*f) : StreamTag::Shared;
    if (tag != StreamTag::Vertical && out.horizontal.size() < h_target) out.horizontal.push_back(base);
    if (tag != StreamTag::Horizontal && out.vertical.size() < v_target) out.vertical.push_back(base);
  }
  if (out.horizontal.size() < h_target)
    out.warnings.push_back("horizontal pool has " + std::to_string(out.horizontal.size()) + " eligible features, wanted " +
                           std::to_string(h_target));
  if (out.vertical.size() < v_target)
    out.warnings.push_back("vertical pool has " + std::to_string(out.vertical.size()) + " eligible features, wanted " +
                           std::to_string(v_target));
  return out;
}

namespace {

PoolReport run_pool(const Dataset& data, const std::string& pool, const Config& cfg, int last_stage) {
  PoolReport rep;
  rep.pool = pool;
  rep.pearson_names = data.names;

  rep.stage_inputs[1] = data.names;
  auto s1 = stage1_pearson_prune(data, cfg.pearson_threshold);
  rep.pearson = s1.correlation;
  rep.correlated_pairs = s1.pairs;
  rep.dropped = s1.dropped;
  rep.stage_outputs[1] = s1.survivors;
  if (last_stage < 2) return rep;

  auto current = select_columns(data, s1.survivors);
  rep.stage_inputs[2] = current.names;
  rep.mi_scores = stage2_mutual_information(current, cfg.mi_bins);
  std::vector<std::string> keep;
  for (const auto& n : current.names) {
    if (rep.mi_scores[n] >= cfg.mi_min) keep.push_back(n);
    else rep.dropped.push_back({n, 2, "mutual information below " + std::to_string(cfg.mi_min) + " nats"});
  }
  rep.stage_outputs[2] = keep;
  if (last_stage < 3) return rep;

  current = select_columns(current, keep);
  rep.stage_inputs[3] = current.names;
  rep.rf_importances = stage3_rf_importance(current, cfg.forest);
  keep.clear();
  for (const auto& n : current.names) {
    if (rep.rf_importances[n] >= cfg.rf_min) keep.push_back(n);
    else rep.dropped.push_back({n, 3, "forest importance below " + std::to_string(cfg.rf_min)});
  }
  rep.stage_outputs[3] = keep;
  if (last_stage < 4) return rep;

  current = select_columns(current, keep);
  rep.stage_inputs[4] = current.names;
  rep.sfs = stage4_sfs_ridge(current, cfg.sfs_max_k, cfg.ridge_lambda, cfg.sfs_min_gain, cfg.sfs_holdout);
  keep.clear();
  for (const auto& step : rep.sfs.order) keep.push_back(step.feature);
  for (const auto& n : current.names)
    if (std::find(keep.begin(), keep.end(), n) == keep.end())
      rep.dropped.push_back({n, 4, "not chosen by forward selection (" + rep.sfs.stop_reason + ")"});
  rep.stage_outputs[4] = keep;
  if (last_stage < 5) return rep;

  current = select_columns(current, keep);
  rep.stage_inputs[5] = current.names;
  if (!current.names.empty()) rep.vif_values = stage5_vif(current);
  rep.stage_outputs[5] = current.names;  // reported, never dropped
  return rep;
}

template <typename Map>
std::vector<std::string> ranked_by(const Map& scores, const std::vector<std::string>& names) {
  auto out = names;
  std::stable_sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    const double sa = scores.count(a) ? scores.at(a) : -1.0;
    const double sb = scores.count(b) ? scores.at(b) : -1.0;
    return sa > sb;
  });
  return out;
}

}  // namespace

SelectionReport run_pipeline(const SelectionData& data, const Config& cfg, int last_stage) {
  if (last_stage < 1 || last_stage > 7) throw Error(ErrorCode::InvalidConfig, "stage must be in 1..7");
  SelectionReport rep;
  rep.last_stage = last_stage;
  rep.horizontal = run_pool(data.horizontal, "horizontal", cfg, last_stage);
  rep.vertical = run_pool(data.vertical, "vertical", cfg, last_stage);
  if (last_stage < 6) return rep;

  rep.stage6_input = rep.horizontal.stage_outputs[5];
  rep.stage6_input.insert(rep.stage6_input.end(), rep.vertical.stage_outputs[5].begin(),
                          rep.vertical.stage_outputs[5].end());
  rep.stage6_output = stage6_dedup(rep.stage6_input);
  if (last_stage < 7) return rep;

  // Rank bases through their kept variant's scores in its own pool.
  std::vector<std::string> bases;
  std::map<std::string, double> mi, rf, sfs;
  for (const auto& e : rep.stage6_output) {
    bases.push_back(e.base);
    const auto& pool = parse_suffix(e.variant).stream == 'V' ? rep.vertical : rep.horizontal;
    mi[e.base] = pool.mi_scores.count(e.variant) ? pool.mi_scores.at(e.variant) : 0.0;
    rf[e.base] = pool.rf_importances.count(e.variant) ? pool.rf_importances.at(e.variant) : 0.0;
    double s = 0;
    for (std::size_t i = 0; i < pool.sfs.order.size(); ++i)
      if (pool.sfs.order[i].feature == e.variant) s = static_cast<double>(pool.sfs.order.size() - i);
    sfs[e.base] = s;
  }
  rep.stage7_ranking = borda_aggregate(bases, {ranked_by(mi, bases), ranked_by(rf, bases), ranked_by(sfs, bases)});
  auto split = stage7_final_split(rep.stage7_ranking, cfg.horizontal_target, cfg.vertical_target);
  rep.final_horizontal = split.horizontal;
  rep.final_vertical = split.vertical;
  rep.warnings = split.warnings;
  return rep;
}

namespace {
nlohmann::json pool_json(const PoolReport& p) {
  using nlohmann::json;
  json j;
  j["pool"] = p.pool;
  json stages = json::array();
  for (const auto& [k, in] : p.stage_inputs) {
    json s;
    s["stage"] = k;
    s["input"] = in;
    s["output"] = p.stage_outputs.count(k) ? p.stage_outputs.at(k) : std::vector<std::string>{};
    stages.push_back(s);
  }
  j["stages"] = stages;
  json matrix = json::array();
  for (Eigen::Index r = 0; r < p.pearson.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < p.pearson.cols(); ++c) {
      const double v = p.pearson(r, c);
      row.push_back(std::isnan(v) ? json(nullptr) : json(v));
    }
    matrix.push_back(row);
  }
  j["pearson"] = {{"names", p.pearson_names}, {"matrix", matrix}};
  json pairs = json::array();
  for (const auto& pr : p.correlated_pairs) pairs.push_back({{"kept", pr.kept}, {"dropped", pr.dropped}, {"r", pr.r}});
  j["correlated_pairs"] = pairs;
  j["mi_scores"] = p.mi_scores;
  j["rf_importances"] = p.rf_importances;
  json sfs = json::array();
  for (const auto& s : p.sfs.order) sfs.push_back({{"feature", s.feature}, {"validation_r2", s.validation_r2}});
  j["sfs_order"] = sfs;
  j["sfs_stop_reason"] = p.sfs.stop_reason;
  j["vif_values"] = p.vif_values;
  json dropped = json::array();
  for (const auto& d : p.dropped) dropped.push_back({{"feature", d.name}, {"stage", d.stage}, {"rule", d.rule}});
  j["dropped"] = dropped;
  return j;
}
}  // namespace

void write_report_json(std::ostream& out, const SelectionReport& r) {
  using nlohmann::json;
  json j;
  j["last_stage"] = r.last_stage;
  j["horizontal"] = pool_json(r.horizontal);
  j["vertical"] = pool_json(r.vertical);
  if (r.last_stage >= 6) {
    j["stage6"]["input"] = r.stage6_input;
    json o = json::array();
    for (const auto& e : r.stage6_output) o.push_back({{"base", e.base}, {"variant", e.variant}, {"votes", e.votes}});
    j["stage6"]["output"] = o;
  }
  if (r.last_stage >= 7) {
    j["stage7"]["ranking"] = r.stage7_ranking;
    j["final_horizontal"] = r.final_horizontal;
    j["final_vertical"] = r.final_vertical;
    j["warnings"] = r.warnings;
  }
  out << j.dump(2) << '\n';
}

std::vector<Feature> to_features(const std::vector<std::string>& bases) {
  std::vector<Feature> out;
  for (const auto& b : bases)
    if (auto f = feature_from_name(b)) out.push_back(*f);
  return out;
}

}  // namespace loadcast::featsel
