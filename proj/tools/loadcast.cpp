// Command-line driver for the load-factor forecasting pipeline.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "loadcast/config.hpp"
#include "loadcast/csv.hpp"
#include "loadcast/digest.hpp"
#include "loadcast/evaluation.hpp"
#include "loadcast/featsel.hpp"
#include "loadcast/features.hpp"
#include "loadcast/ingest.hpp"
#include "loadcast/model.hpp"
#include "loadcast/pipeline.hpp"
#include "loadcast/sequences.hpp"
#include "loadcast/training.hpp"

namespace fs = std::filesystem;
using namespace loadcast;

namespace {

enum Exit { kOk = 0, kBadArgs = 2, kMissingInput = 3, kNumeric = 4 };

struct Global {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string manifest = "manifest.json";
  unsigned jobs = 1;
  std::vector<std::string> argv;
};

KeyValueConfig load_config(const Global& g) {
  if (g.config.empty()) return {};
  return KeyValueConfig::load(g.config);
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& local, const Global& g) {
  if (local) return *local;
  if (g.seed) return *g.seed;
  if (const char* env = std::getenv("LOADCAST_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "LOADCAST_SEED is not an unsigned integer");
    }
  }
  return 0;
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::MissingInput, "input not found: " + path);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MissingInput, "cannot write " + path.string());
  return out;
}

void record(const Global& g, const std::string& stage, const KeyValueConfig& effective, std::uint64_t seed,
            const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  auto manifest = RunManifest::load(g.manifest);
  StageRecord r;
  r.name = stage;
  r.config_hash = sha256_hex(effective.render());
  r.seed = seed;
  r.arguments = g.argv;
  r.inputs = digest_paths(inputs);
  r.outputs = digest_paths(outputs);
  manifest.record(std::move(r));
  manifest.save(g.manifest);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

SequenceConfig sequence_config(const KeyValueConfig& kv) {
  SequenceConfig s;
  s.horizontal_window = static_cast<int>(kv.get_int("sequences.horizontal_window", s.horizontal_window));
  s.vertical_window = static_cast<int>(kv.get_int("sequences.vertical_window", s.vertical_window));
  s.stride = static_cast<int>(kv.get_int("sequences.stride", s.stride));
  s.min_offset = static_cast<int>(kv.get_int("sequences.min_offset", s.min_offset));
  s.max_offset = static_cast<int>(kv.get_int("sequences.max_offset", s.max_offset));
  return s;
}

TrainConfig train_config(const KeyValueConfig& kv) {
  TrainConfig t;
  t.batch_size = static_cast<std::size_t>(kv.get_int("training.batch_size", static_cast<long>(t.batch_size)));
  t.max_epochs = static_cast<int>(kv.get_int("training.max_epochs", t.max_epochs));
  t.early_stop_patience = static_cast<int>(kv.get_int("training.early_stop_patience", t.early_stop_patience));
  t.plateau_patience = static_cast<int>(kv.get_int("training.plateau_patience", t.plateau_patience));
  t.plateau_factor = kv.get_double("training.plateau_factor", t.plateau_factor);
  t.min_lr = kv.get_double("training.min_lr", t.min_lr);
  return t;
}

// Re-expresses cached samples in the statistics of a checkpoint's scaler.
std::vector<SequenceSample> restandardize(std::vector<SequenceSample> samples, const SplitCorpus& from,
                                          const std::optional<Scaler>& to) {
  if (!to) return samples;
  for (auto& s : samples) {
    if (from.standardized) from.scaler.inverse(s);
    to->transform(s);
  }
  return samples;
}

std::vector<SequenceSample> partition(const SplitCorpus& c, const std::string& name) {
  if (name == "train") return c.train;
  if (name == "validation") return c.validation;
  if (name == "test") return c.test;
  if (name == "all") {
    auto all = c.train;
    all.insert(all.end(), c.validation.begin(), c.validation.end());
    all.insert(all.end(), c.test.begin(), c.test.end());
    return all;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown partition " + name);
}

ModelPredictions checkpoint_predictions(const std::vector<std::string>& checkpoints, const SplitCorpus& corpus,
                                        bool include_naive) {
  ModelPredictions preds;
  for (const auto& path : checkpoints) {
    require_file(path);
    auto ck = load_checkpoint(path);
    const auto scaler = ck.scaler ? *ck.scaler : corpus.scaler;
    auto name = to_string(ck.model->spec().variant);
    for (int k = 2; preds.count(name); ++k) name = to_string(ck.model->spec().variant) + "#" + std::to_string(k);
    preds[name] = predict_samples(*ck.model, restandardize(corpus.test, corpus, ck.scaler), scaler);
  }
  if (include_naive) {
    auto& naive = preds["naive"];
    for (const auto& s : corpus.test)
      naive.push_back({s.route_id, s.flight_date, s.days_before_departure, s.target_plf, s.naive_plf, s.naive_plf});
  }
  return preds;
}

}  // namespace

int main(int argc, char** argv) {
  Global g;
  g.argv.assign(argv + 1, argv + argc);
  CLI::App app{"loadcast: passenger load factor forecasting toolkit"};
  app.require_subcommand(1);
  app.add_option("--seed", g.seed, "Seed for every stochastic stage (fallback: LOADCAST_SEED, then 0)");
  app.add_option("--config", g.config, "Key-value config file ([generator], [features], [sequences], [training])")
      ->check(CLI::ExistingFile);
  app.add_option("--manifest", g.manifest, "Run manifest to update")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Parallel model slots for evaluate and sweep")->capture_default_str();

  // ---------------------------------------------------------------- generate
  auto* gen = app.add_subcommand("generate", "Write a seeded synthetic reservation corpus");
  std::string gen_out;
  std::optional<std::uint64_t> gen_seed;
  std::optional<int> gen_routes, gen_flights;
  std::optional<double> gen_nonlinear, gen_churn;
  gen->add_option("--out-dir", gen_out, "Directory for reservations/airports/holidays/routes CSVs")->required();
  gen->add_option("--seed", gen_seed, "Stage seed override");
  gen->add_option("--routes", gen_routes, "Number of routes (the four-route roster repeats beyond 4)");
  gen->add_option("--flights", gen_flights, "Flights per route");
  gen->add_option("--nonlinear", gen_nonlinear, "Planted nonlinear effect amplitude in [0,1]");
  gen->add_option("--churn", gen_churn, "Last-week churn rate in [0,1]");
  gen->callback([&] {
    auto kv = load_config(g);
    auto cfg = GeneratorConfig::from(kv);
    if (gen_routes) cfg.routes = *gen_routes;
    if (gen_flights) cfg.flights_per_route = *gen_flights;
    if (gen_nonlinear) cfg.nonlinear = *gen_nonlinear;
    if (gen_churn) cfg.churn_rate = *gen_churn;
    cfg.validate();
    const auto seed = resolve_seed(gen_seed, g);
    const auto corpus = generate_synthetic(cfg, seed);
    const fs::path dir(gen_out);
    std::vector<fs::path> outs{dir / "reservations.csv", dir / "airports.csv", dir / "holidays.csv",
                               dir / "routes.csv", dir / "generator.toml"};
    {
      auto o = open_out(outs[0]);
      write_reservations(o, corpus.snapshots);
    }
    {
      auto o = open_out(outs[1]);
      write_airports(o, corpus.airports);
    }
    {
      auto o = open_out(outs[2]);
      write_holidays(o, corpus.holidays);
    }
    {
      auto o = open_out(outs[3]);
      write_routes(o, corpus.routes);
    }
    const auto effective = cfg.to_kv();
    {
      auto o = open_out(outs[4]);
      o << effective.render();
    }
    record(g, "generate", effective, seed, {}, outs);
    std::cout << "generated " << corpus.snapshots.size() << " leg snapshots on " << corpus.routes.size()
              << " routes\n";
  });

  // ---------------------------------------------------------------- ingest
  auto* ing = app.add_subcommand("ingest", "Validate a reservation feed and merge legs to flight level");
  std::string ing_in, ing_out;
  bool ing_strict = false;
  ing->add_option("--reservations", ing_in, "Leg-level reservations CSV")->required();
  ing->add_option("--out", ing_out, "Flight-level reservations CSV")->required();
  ing->add_flag("--strict-aircraft", ing_strict, "Fail when merged legs disagree on aircraft type");
  ing->callback([&] {
    require_file(ing_in);
    const auto rows = aggregate_legs(load_reservations(ing_in), {ing_strict});
    auto o = open_out(ing_out);
    write_reservations(o, rows);
    o.close();
    KeyValueConfig eff;
    eff.set("ingest.strict_aircraft", ing_strict ? "true" : "false");
    record(g, "ingest", eff, 0, {ing_in}, {ing_out});
    std::cout << "wrote " << rows.size() << " flight-level snapshots\n";
  });

  // ---------------------------------------------------------------- features
  auto* fea = app.add_subcommand("features", "Engineer the 39-column feature table");
  std::string fea_res, fea_routes, fea_airports, fea_holidays, fea_out;
  std::optional<std::size_t> fea_window;
  bool fea_clip = false;
  fea->add_option("--reservations", fea_res, "Flight-level reservations CSV")->required();
  fea->add_option("--routes", fea_routes, "Route metadata CSV")->required();
  fea->add_option("--airports", fea_airports, "Airport coordinates CSV")->required();
  fea->add_option("--holidays", fea_holidays, "Holiday calendar CSV")->required();
  fea->add_option("--out", fea_out, "Feature table CSV")->required();
  fea->add_option("--rolling-window", fea_window, "Records in the rolling PLF mean");
  fea->add_flag("--clip-plf", fea_clip, "Cap PLF at 100 for overbooked flights");
  fea->callback([&] {
    for (const auto& p : {fea_res, fea_routes, fea_airports, fea_holidays}) require_file(p);
    const auto kv = load_config(g);
    FeatureConfig fc;
    fc.rolling_window = static_cast<std::size_t>(kv.get_int("features.rolling_window", 7));
    fc.clip_plf = kv.get_bool("features.clip_plf", false);
    if (fea_window) fc.rolling_window = *fea_window;
    if (fea_clip) fc.clip_plf = true;
    if (fc.rolling_window == 0) throw Error(ErrorCode::InvalidConfig, "rolling window must be at least 1");
    const auto airports = load_airports(fea_airports);
    const auto table = build_feature_rows(load_reservations(fea_res), load_routes(fea_routes, airports),
                                          load_holidays(fea_holidays), fc);
    auto o = open_out(fea_out);
    write_features(o, table);
    o.close();
    KeyValueConfig eff;
    eff.set("features.rolling_window", std::to_string(fc.rolling_window));
    eff.set("features.clip_plf", fc.clip_plf ? "true" : "false");
    record(g, "features", eff, 0, {fea_res, fea_routes, fea_airports, fea_holidays}, {fea_out});
    std::cout << "wrote " << table.rows.size() << " feature rows\n";
  });

  // ---------------------------------------------------------------- select
  auto* sel = app.add_subcommand("select", "Run the seven-stage feature selection");
  std::string sel_in, sel_out;
  int sel_stage = 7;
  std::optional<std::size_t> sel_rows;
  std::optional<std::uint64_t> sel_seed;
  sel->add_option("--features", sel_in, "Feature table CSV")->required();
  sel->add_option("--out", sel_out, "selection_report.json")->required();
  sel->add_option("--stage", sel_stage, "Run stages 1..k only")->check(CLI::Range(1, 7))->capture_default_str();
  sel->add_option("--max-rows", sel_rows, "Chronological subsample size for the candidate matrix");
  sel->add_option("--seed", sel_seed, "Stage seed override (forest)");
  sel->callback([&] {
    require_file(sel_in);
    const auto kv = load_config(g);
    featsel::Config fc;
    fc.max_rows = static_cast<std::size_t>(kv.get_int("featsel.max_rows", static_cast<long>(fc.max_rows)));
    if (sel_rows) fc.max_rows = *sel_rows;
    const auto seed = resolve_seed(sel_seed, g);
    fc.forest.seed = seed;
    const auto seq = sequence_config(kv);
    const auto data = featsel::make_selection_data(read_features(sel_in), seq, fc.max_rows);
    const auto report = featsel::run_pipeline(data, fc, sel_stage);
    auto o = open_out(sel_out);
    featsel::write_report_json(o, report);
    o.close();
    KeyValueConfig eff;
    eff.set("featsel.stage", std::to_string(sel_stage));
    eff.set("featsel.max_rows", std::to_string(fc.max_rows));
    record(g, "select", eff, seed, {sel_in}, {sel_out});
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
    if (sel_stage == 7) {
      std::cout << "horizontal:";
      for (const auto& f : report.final_horizontal) std::cout << ' ' << f;
      std::cout << "\nvertical:";
      for (const auto& f : report.final_vertical) std::cout << ' ' << f;
      std::cout << '\n';
    }
  });

  // ---------------------------------------------------------------- sequences
  auto* seq = app.add_subcommand("sequences", "Build horizontal/vertical windows and the chronological split");
  std::string seq_in, seq_out, seq_sel;
  std::optional<int> seq_h, seq_v, seq_stride, seq_min, seq_max;
  seq->add_option("--features", seq_in, "Feature table CSV")->required();
  seq->add_option("--out-dir", seq_out, "Directory for samples.bin, split_manifest.csv, skipped.csv")->required();
  seq->add_option("--horizontal-window", seq_h, "Horizontal window length H");
  seq->add_option("--vertical-window", seq_v, "Vertical window length V");
  seq->add_option("--stride", seq_stride, "Vertical stride s (1 = most recent flights)");
  seq->add_option("--min-d", seq_min, "Smallest days-before-departure");
  seq->add_option("--max-d", seq_max, "Largest days-before-departure");
  seq->add_option("--selection", seq_sel, "Take feature lists from a stage-7 selection report");
  seq->callback([&] {
    require_file(seq_in);
    const auto kv = load_config(g);
    auto sc = sequence_config(kv);
    if (seq_h) sc.horizontal_window = *seq_h;
    if (seq_v) sc.vertical_window = *seq_v;
    if (seq_stride) sc.stride = *seq_stride;
    if (seq_min) sc.min_offset = *seq_min;
    if (seq_max) sc.max_offset = *seq_max;
    if (sc.horizontal_window < 1 || sc.vertical_window < 1 || sc.stride < 1 || sc.min_offset < 0 ||
        sc.max_offset < sc.min_offset)
      throw Error(ErrorCode::InvalidConfig, "invalid window settings");
    std::vector<fs::path> inputs{seq_in};
    if (!seq_sel.empty()) {
      require_file(seq_sel);
      std::ifstream in(seq_sel);
      nlohmann::json j;
      in >> j;
      if (!j.contains("final_horizontal"))
        throw Error(ErrorCode::BadFormat, "selection report lacks final lists (run all 7 stages)");
      sc.horizontal_features = featsel::to_features(j["final_horizontal"].get<std::vector<std::string>>());
      sc.vertical_features = featsel::to_features(j["final_vertical"].get<std::vector<std::string>>());
      if (sc.horizontal_features.empty() || sc.vertical_features.empty())
        throw Error(ErrorCode::BadFormat, "selection report has an empty feature list");
      inputs.push_back(seq_sel);
    }
    auto set = assemble_samples(read_features(seq_in), sc);
    const auto corpus = chronological_split(std::move(set.samples));
    const fs::path dir(seq_out);
    std::vector<fs::path> outs{dir / "samples.bin", dir / "split_manifest.csv", dir / "skipped.csv"};
    fs::create_directories(dir);
    write_sample_cache(outs[0], corpus);
    {
      auto o = open_out(outs[1]);
      write_manifest(o, corpus);
    }
    {
      auto o = open_out(outs[2]);
      write_skip_counts(o, set.skipped);
    }
    KeyValueConfig eff;
    eff.set("sequences.horizontal_window", std::to_string(sc.horizontal_window));
    eff.set("sequences.vertical_window", std::to_string(sc.vertical_window));
    eff.set("sequences.stride", std::to_string(sc.stride));
    eff.set("sequences.min_offset", std::to_string(sc.min_offset));
    eff.set("sequences.max_offset", std::to_string(sc.max_offset));
    record(g, "sequences", eff, 0, inputs, outs);
    std::cout << "samples train/validation/test: " << corpus.train.size() << '/' << corpus.validation.size()
              << '/' << corpus.test.size() << ", skipped " << set.skipped.total() << '\n';
  });

  // ---------------------------------------------------------------- train
  auto* tr = app.add_subcommand("train", "Fit one model variant");
  std::string tr_samples, tr_variant, tr_runs = "runs", tr_opt;
  std::optional<int> tr_epochs;
  std::optional<std::size_t> tr_batch;
  std::optional<double> tr_lr;
  std::optional<std::uint64_t> tr_seed;
  tr->add_option("--samples", tr_samples, "samples.bin from the sequences stage")->required();
  tr->add_option("--variant", tr_variant, "Model variant, e.g. DLSTM-HA")->required();
  tr->add_option("--runs-dir", tr_runs, "Checkpoint root; writes <dir>/<variant>/<seed>/")->capture_default_str();
  tr->add_option("--max-epochs", tr_epochs, "Epoch budget");
  tr->add_option("--batch-size", tr_batch, "Mini-batch size");
  tr->add_option("--lr", tr_lr, "Learning rate override");
  tr->add_option("--optimizer", tr_opt, "Optimizer override (Adam or RMSprop)");
  tr->add_option("--seed", tr_seed, "Stage seed override");
  tr->callback([&] {
    require_file(tr_samples);
    const auto kv = load_config(g);
    const auto corpus = read_sample_cache(tr_samples);
    if (corpus.train.empty()) throw Error(ErrorCode::EmptyPartition, "no training samples");
    auto tc = train_config(kv);
    if (tr_epochs) tc.max_epochs = *tr_epochs;
    if (tr_batch) tc.batch_size = *tr_batch;
    if (tr_lr) tc.learning_rate = *tr_lr;
    if (!tr_opt.empty()) tc.optimizer = optimizer_from_name(tr_opt);
    tc.seed = resolve_seed(tr_seed, g);
    const auto& first = corpus.train.front();
    const auto spec = reference_spec(variant_from_name(tr_variant), static_cast<int>(first.horizontal.dim(1)),
                                     static_cast<int>(first.vertical.dim(1)), static_cast<int>(first.horizontal.dim(0)),
                                     static_cast<int>(first.vertical.dim(0)));
    const fs::path dir = fs::path(tr_runs) / tr_variant / std::to_string(tc.seed);
    fs::create_directories(dir);
    std::vector<fs::path> outs{dir / "best.ckpt", dir / "train_log.csv"};
    FitResult res;
    try {
      res = fit(spec, corpus, tc);
    } catch (const DivergenceError& e) {
      auto o = open_out(outs[1]);
      write_train_log(o, e.log());
      throw;
    }
    save_checkpoint(outs[0], *res.model, &corpus.scaler);
    {
      auto o = open_out(outs[1]);
      write_train_log(o, res.log);
    }
    KeyValueConfig eff;
    eff.set("train.variant", tr_variant);
    eff.set("train.spec", serialize_spec(spec));
    eff.set("train.max_epochs", std::to_string(tc.max_epochs));
    eff.set("train.batch_size", std::to_string(tc.batch_size));
    record(g, "train", eff, tc.seed, {tr_samples}, outs);
    std::cout << tr_variant << ": best epoch " << res.log.best_epoch << " of " << res.log.stopped_epoch
              << ", validation MSE " << res.log.best_val_loss << " (standardized)\n";
  });

  // ---------------------------------------------------------------- evaluate
  auto* ev = app.add_subcommand("evaluate", "Leaderboard of variants and baselines over seeds");
  std::string ev_samples, ev_out, ev_variants = "SLSTM-H,SLSTM-V,DLSTM-HA", ev_baselines = "linear,ridge,random_forest,naive",
                                  ev_seeds = "1,2,3", ev_runs;
  std::optional<int> ev_epochs;
  ev->add_option("--samples", ev_samples, "samples.bin from the sequences stage")->required();
  ev->add_option("--out-dir", ev_out, "Directory for leaderboard.csv and predictions.csv")->required();
  ev->add_option("--variants", ev_variants, "Comma-separated model variants")->capture_default_str();
  ev->add_option("--baselines", ev_baselines, "Comma-separated baselines")->capture_default_str();
  ev->add_option("--seeds", ev_seeds, "Comma-separated seeds")->capture_default_str();
  ev->add_option("--max-epochs", ev_epochs, "Epoch budget per fit");
  ev->add_option("--runs-dir", ev_runs, "Also save each fit under <dir>/<variant>/<seed>/");
  ev->callback([&] {
    require_file(ev_samples);
    const auto kv = load_config(g);
    const auto corpus = read_sample_cache(ev_samples);
    LeaderboardConfig lc;
    for (const auto& v : split_list(ev_variants)) lc.variants.push_back(variant_from_name(v));
    for (const auto& b : split_list(ev_baselines)) lc.baselines.push_back(baseline_from_name(b));
    lc.seeds.clear();
    for (const auto& s : split_list(ev_seeds)) {
      try {
        lc.seeds.push_back(std::stoull(s));
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidConfig, "bad seed '" + s + "'");
      }
    }
    lc.train = train_config(kv);
    if (ev_epochs) lc.train.max_epochs = *ev_epochs;
    lc.jobs = g.jobs;
    std::vector<fs::path> outs{fs::path(ev_out) / "leaderboard.csv", fs::path(ev_out) / "predictions.csv"};
    if (!ev_runs.empty()) {
      lc.on_fit = [&](const std::string& model, std::uint64_t seed, Model& m, const TrainLog& log) {
        const fs::path dir = fs::path(ev_runs) / model / std::to_string(seed);
        save_checkpoint(dir / "best.ckpt", m, &corpus.scaler);
        auto o = open_out(dir / "train_log.csv");
        write_train_log(o, log);
        outs.push_back(dir / "best.ckpt");
        outs.push_back(dir / "train_log.csv");
      };
    }
    const auto res = leaderboard(corpus, lc);
    {
      auto o = open_out(outs[0]);
      write_leaderboard_csv(o, res.rows);
    }
    {
      auto o = open_out(outs[1]);
      o << "model,seed,route_id,flight_date,d,actual,naive,predicted\n";
      for (const auto& [model, per_seed] : res.predictions)
        for (std::size_t k = 0; k < per_seed.size(); ++k)
          for (const auto& p : per_seed[k])
            o << model << ',' << lc.seeds[k] << ',' << p.route_id << ',' << p.flight_date.iso() << ',' << p.d << ','
              << csv::format(p.actual) << ',' << csv::format(p.naive) << ',' << csv::format(p.predicted) << '\n';
    }
    KeyValueConfig eff;
    eff.set("evaluate.variants", ev_variants);
    eff.set("evaluate.baselines", ev_baselines);
    eff.set("evaluate.seeds", ev_seeds);
    eff.set("evaluate.max_epochs", std::to_string(lc.train.max_epochs));
    record(g, "evaluate", eff, lc.seeds.front(), {ev_samples}, outs);
    for (const auto& r : res.rows)
      std::cout << r.model << ": MAE " << r.mean.mae << " +- " << r.std.mae << ", R2 " << r.mean.r2 << '\n';
  });

  // ---------------------------------------------------------------- horizon
  auto* hz = app.add_subcommand("horizon", "Per-day-before-departure metrics and plots");
  std::string hz_samples, hz_out, hz_ckpts;
  int hz_min = 0, hz_max = 21;
  bool hz_naive = false;
  hz->add_option("--samples", hz_samples, "samples.bin from the sequences stage")->required();
  hz->add_option("--checkpoints", hz_ckpts, "Comma-separated checkpoint files")->required();
  hz->add_option("--out-dir", hz_out, "Directory for horizon.csv and SVG plots")->required();
  hz->add_option("--min-d", hz_min, "Smallest days-before-departure")->capture_default_str();
  hz->add_option("--max-d", hz_max, "Largest days-before-departure")->capture_default_str();
  hz->add_flag("--include-naive", hz_naive, "Add the persistence forecast as a model");
  hz->callback([&] {
    require_file(hz_samples);
    const auto corpus = read_sample_cache(hz_samples);
    const auto ckpts = split_list(hz_ckpts);
    const auto report = horizon_analysis(checkpoint_predictions(ckpts, corpus, hz_naive), hz_min, hz_max);
    const fs::path dir(hz_out);
    std::vector<fs::path> outs{dir / "horizon.csv", dir / "horizon_mae.svg", dir / "horizon_r2.svg"};
    {
      auto o = open_out(outs[0]);
      write_horizon_csv(o, report);
    }
    {
      auto o = open_out(outs[1]);
      write_horizon_svg(o, report, "mae");
    }
    {
      auto o = open_out(outs[2]);
      write_horizon_svg(o, report, "r2");
    }
    std::vector<fs::path> ins{hz_samples};
    for (const auto& c : ckpts) ins.emplace_back(c);
    KeyValueConfig eff;
    eff.set("horizon.range", std::to_string(hz_min) + ".." + std::to_string(hz_max));
    record(g, "horizon", eff, 0, ins, outs);
  });

  // ---------------------------------------------------------------- categories
  auto* ca = app.add_subcommand("categories", "Metrics by route category pair");
  std::string ca_samples, ca_out, ca_ckpts, ca_routes, ca_airports;
  bool ca_naive = false;
  ca->add_option("--samples", ca_samples, "samples.bin from the sequences stage")->required();
  ca->add_option("--checkpoints", ca_ckpts, "Comma-separated checkpoint files")->required();
  ca->add_option("--routes", ca_routes, "Route metadata CSV")->required();
  ca->add_option("--airports", ca_airports, "Airport coordinates CSV")->required();
  ca->add_option("--out-dir", ca_out, "Directory for categories.csv and SVG plots")->required();
  ca->add_flag("--include-naive", ca_naive, "Add the persistence forecast as a model");
  ca->callback([&] {
    for (const auto& p : {ca_samples, ca_routes, ca_airports}) require_file(p);
    const auto corpus = read_sample_cache(ca_samples);
    const auto routes = load_routes(ca_routes, load_airports(ca_airports));
    const auto ckpts = split_list(ca_ckpts);
    const auto cells = category_report(checkpoint_predictions(ckpts, corpus, ca_naive), routes);
    const fs::path dir(ca_out);
    std::vector<fs::path> outs{dir / "categories.csv", dir / "categories_mae.svg", dir / "categories_mape.svg"};
    {
      auto o = open_out(outs[0]);
      write_categories_csv(o, cells);
    }
    {
      auto o = open_out(outs[1]);
      write_categories_svg(o, cells, "mae");
    }
    {
      auto o = open_out(outs[2]);
      write_categories_svg(o, cells, "mape");
    }
    std::vector<fs::path> ins{ca_samples, ca_routes, ca_airports};
    for (const auto& c : ckpts) ins.emplace_back(c);
    record(g, "categories", {}, 0, ins, outs);
  });

  // ---------------------------------------------------------------- sweep
  auto* sw = app.add_subcommand("sweep", "Grid search over window sizes");
  std::string sw_in, sw_out, sw_sizes = "3,6,9,12,15,18", sw_arch = "SLSTM-H,SLSTM-V,SLSTM-C,DLSTM";
  int sw_epochs = 10;
  bool sw_asym = false;
  std::optional<std::uint64_t> sw_seed;
  sw->add_option("--features", sw_in, "Feature table CSV")->required();
  sw->add_option("--out", sw_out, "sweep.csv")->required();
  sw->add_option("--sizes", sw_sizes, "Comma-separated window sizes")->capture_default_str();
  sw->add_option("--architectures", sw_arch, "Comma-separated variants")->capture_default_str();
  sw->add_option("--max-epochs", sw_epochs, "Epoch budget per fit")->capture_default_str();
  sw->add_flag("--asymmetric", sw_asym, "Sweep every (H, V) pair instead of H = V");
  sw->add_option("--seed", sw_seed, "Stage seed override");
  std::string sw_winner;
  sw->add_option("--winner-config", sw_winner, "Write the best (H, V) as a [sequences] config file");
  sw->callback([&] {
    require_file(sw_in);
    const auto kv = load_config(g);
    SweepConfig sc;
    sc.sizes.clear();
    for (const auto& s : split_list(sw_sizes)) {
      try {
        sc.sizes.push_back(std::stoi(s));
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidConfig, "bad window size '" + s + "'");
      }
    }
    sc.architectures.clear();
    for (const auto& a : split_list(sw_arch)) sc.architectures.push_back(variant_from_name(a));
    sc.symmetric = !sw_asym;
    sc.sequences = sequence_config(kv);
    sc.train = train_config(kv);
    sc.train.max_epochs = sw_epochs;
    sc.train.seed = resolve_seed(sw_seed, g);
    sc.jobs = g.jobs;
    const auto rows = window_sweep(read_features(sw_in), sc);
    auto o = open_out(sw_out);
    write_sweep_csv(o, rows);
    o.close();
    KeyValueConfig eff;
    eff.set("sweep.sizes", sw_sizes);
    eff.set("sweep.architectures", sw_arch);
    eff.set("sweep.max_epochs", std::to_string(sw_epochs));
    eff.set("sweep.symmetric", sc.symmetric ? "true" : "false");
    std::vector<fs::path> outs{sw_out};
    const auto& best = sweep_winner(rows);
    if (!sw_winner.empty()) {
      auto w = open_out(sw_winner);
      w << winner_config(best).render();
      outs.emplace_back(sw_winner);
    }
    record(g, "sweep", eff, sc.train.seed, {sw_in}, outs);
    std::cout << "best windows: " << best.architecture << " H=" << best.horizontal_window
              << " V=" << best.vertical_window << '\n';
  });

  // ---------------------------------------------------------------- predict
  auto* pr = app.add_subcommand("predict", "Forecast departure PLF from a checkpoint");
  std::string pr_ckpt, pr_samples, pr_out, pr_part = "test";
  std::optional<long> pr_capacity;
  bool pr_plf_only = false;
  pr->add_option("--checkpoint", pr_ckpt, "best.ckpt from train or evaluate")->required();
  pr->add_option("--samples", pr_samples, "samples.bin from the sequences stage")->required();
  pr->add_option("--out", pr_out, "predictions CSV")->required();
  pr->add_option("--partition", pr_part, "train, validation, test or all")->capture_default_str();
  auto* cap_opt = pr->add_option("--capacity", pr_capacity, "Seats; adds passengers = round(plf/100 * capacity)");
  pr->add_flag("--plf-only", pr_plf_only, "Emit PLF only")->excludes(cap_opt);
  pr->callback([&] {
    require_file(pr_ckpt);
    require_file(pr_samples);
    if (pr_capacity && *pr_capacity <= 0) throw Error(ErrorCode::InvalidConfig, "capacity must be positive");
    const auto corpus = read_sample_cache(pr_samples);
    auto ck = load_checkpoint(pr_ckpt);
    const auto samples = restandardize(partition(corpus, pr_part), corpus, ck.scaler);
    const auto preds = predict_samples(*ck.model, samples, ck.scaler ? *ck.scaler : corpus.scaler);
    auto o = open_out(pr_out);
    o << "route_id,flight_date,d,predicted_plf" << (pr_capacity ? ",passengers" : "") << '\n';
    for (const auto& p : preds) {
      if (!std::isfinite(p.predicted)) throw Error(ErrorCode::DivergenceDetected, "non-finite forecast");
      o << p.route_id << ',' << p.flight_date.iso() << ',' << p.d << ',' << csv::format(p.predicted);
      if (pr_capacity) o << ',' << std::llround(p.predicted / 100.0 * static_cast<double>(*pr_capacity));
      o << '\n';
    }
    o.close();
    KeyValueConfig eff;
    eff.set("predict.partition", pr_part);
    eff.set("predict.capacity", pr_capacity ? std::to_string(*pr_capacity) : "none");
    record(g, "predict", eff, 0, {pr_ckpt, pr_samples}, {pr_out});
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadArgs;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::InvalidConfig:
      case ErrorCode::IllegalSpec:
        return kBadArgs;
      case ErrorCode::DivergenceDetected:
      case ErrorCode::ZeroCapacity:
      case ErrorCode::ShapeMismatch:
        return kNumeric;
      default:
        return kMissingInput;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMissingInput;
  }
  return kOk;
}
