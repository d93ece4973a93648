#include "loadcast/sequences.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <tuple>

#include "loadcast/csv.hpp"
#include "loadcast/error.hpp"

namespace loadcast {

FlightIndex::FlightIndex(const FeatureTable& table) : table_(&table) {
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    if (r.days_before_departure < 0 || r.days_before_departure > kMaxOffset) continue;
    auto& per_flight = index_[r.route_id];
    auto [it, inserted] = per_flight.try_emplace(r.flight_date);
    if (inserted) it->second.fill(-1);
    it->second[static_cast<std::size_t>(r.days_before_departure)] = static_cast<long>(i);
  }
}

const std::map<Date, FlightIndex::Offsets>* FlightIndex::route(const std::string& route_id) const {
  auto it = index_.find(route_id);
  return it == index_.end() ? nullptr : &it->second;
}

const FlightIndex::Offsets* FlightIndex::flight(const std::string& route_id, const Date& date) const {
  const auto* r = route(route_id);
  if (!r) return nullptr;
  auto it = r->find(date);
  return it == r->end() ? nullptr : &it->second;
}

std::vector<std::string> FlightIndex::routes() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : index_) out.push_back(k);
  return out;
}

namespace {
void copy_row(const FeatureRow& row, const std::vector<Feature>& features, Tensor& out, std::size_t r) {
  for (std::size_t c = 0; c < features.size(); ++c) out.at(r, c) = row[features[c]];
}

bool in_range(int d) { return d >= 0 && d <= FlightIndex::kMaxOffset; }
}  // namespace

Tensor build_horizontal(const FlightIndex& index, const std::string& route_id, const Date& flight_date,
                        int d, int window, const std::vector<Feature>& features) {
  if (window < 1) throw Error(ErrorCode::InvalidConfig, "horizontal window must be >= 1");
  const auto* offsets = index.flight(route_id, flight_date);
  if (!offsets)
    throw Error(ErrorCode::InsufficientHistory, "no rows for flight " + route_id + " " + flight_date.iso());
  Tensor out({static_cast<std::size_t>(window), features.size()});
  for (int k = 0; k < window; ++k) {
    const int offset = d + window - 1 - k;
    const long row = in_range(offset) ? (*offsets)[static_cast<std::size_t>(offset)] : -1;
    if (row < 0)
      throw Error(ErrorCode::InsufficientHistory, route_id + " " + flight_date.iso() +
                                                      " has no snapshot at d=" + std::to_string(offset));
    copy_row(index.table().rows[static_cast<std::size_t>(row)], features, out, static_cast<std::size_t>(k));
  }
  return out;
}

std::vector<Date> vertical_flights(const FlightIndex& index, const std::string& route_id,
                                   const Date& flight_date, int d, int window, int stride) {
  if (window < 1 || stride < 1) throw Error(ErrorCode::InvalidConfig, "window and stride must be >= 1");
  const auto* flights = index.route(route_id);
  std::vector<Date> picked;
  if (flights && in_range(d)) {
    int seen = 0;
    auto it = flights->lower_bound(flight_date);
    while (it != flights->begin() && static_cast<int>(picked.size()) < window) {
      --it;
      if (it->second[static_cast<std::size_t>(d)] < 0) continue;
      if (seen % stride == 0) picked.push_back(it->first);
      ++seen;
    }
  }
  if (static_cast<int>(picked.size()) < window)
    throw Error(ErrorCode::InsufficientHistory,
                route_id + " " + flight_date.iso() + ": only " + std::to_string(picked.size()) +
                    " historical flights at d=" + std::to_string(d));
  std::reverse(picked.begin(), picked.end());
  return picked;
}

Tensor build_vertical(const FlightIndex& index, const std::string& route_id, const Date& flight_date,
                      int d, int window, int stride, const std::vector<Feature>& features) {
  const auto dates = vertical_flights(index, route_id, flight_date, d, window, stride);
  Tensor out({dates.size(), features.size()});
  for (std::size_t k = 0; k < dates.size(); ++k) {
    const long row = (*index.flight(route_id, dates[k]))[static_cast<std::size_t>(d)];
    copy_row(index.table().rows[static_cast<std::size_t>(row)], features, out, k);
  }
  return out;
}

SampleSet assemble_samples(const FeatureTable& table, const SequenceConfig& cfg) {
  const FlightIndex index(table);
  SampleSet set;
  for (const auto& route_id : index.routes()) {
    for (const auto& [date, offsets] : *index.route(route_id)) {
      for (int d = cfg.max_offset; d >= cfg.min_offset; --d) {
        if (!in_range(d) || offsets[static_cast<std::size_t>(d)] < 0) continue;
        if (offsets[0] < 0) {
          ++set.skipped.missing_target;
          continue;
        }
        SequenceSample s;
        s.route_id = route_id;
        s.flight_date = date;
        s.days_before_departure = d;
        try {
          s.horizontal = build_horizontal(index, route_id, date, d, cfg.horizontal_window,
                                          cfg.horizontal_features);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::InsufficientHistory) throw;
          ++set.skipped.insufficient_horizontal;
          continue;
        }
        try {
          s.vertical = build_vertical(index, route_id, date, d, cfg.vertical_window, cfg.stride,
                                      cfg.vertical_features);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::InsufficientHistory) throw;
          ++set.skipped.insufficient_vertical;
          continue;
        }
        s.target_plf = table.rows[static_cast<std::size_t>(offsets[0])][Feature::plf];
        s.naive_plf = table.rows[static_cast<std::size_t>(offsets[static_cast<std::size_t>(d)])][Feature::plf];
        set.samples.push_back(std::move(s));
      }
    }
  }
  return set;
}

// ---------------------------------------------------------------------------

void ColumnScaler::transform(Tensor& t) const {
  auto m = t.matrix();
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    m.col(c) = (m.col(c).array() - mean[static_cast<std::size_t>(c)]) / std[static_cast<std::size_t>(c)];
}

void ColumnScaler::inverse(Tensor& t) const {
  auto m = t.matrix();
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    m.col(c) = m.col(c).array() * std[static_cast<std::size_t>(c)] + mean[static_cast<std::size_t>(c)];
}

void Scaler::transform(SequenceSample& s) const {
  horizontal.transform(s.horizontal);
  vertical.transform(s.vertical);
}

void Scaler::inverse(SequenceSample& s) const {
  horizontal.inverse(s.horizontal);
  vertical.inverse(s.vertical);
}

namespace {
ColumnScaler fit_columns(const std::vector<SequenceSample>& train, bool horizontal) {
  ColumnScaler sc;
  if (train.empty()) return sc;
  const auto& first = horizontal ? train.front().horizontal : train.front().vertical;
  const std::size_t cols = first.dim(1);
  std::vector<double> sum(cols, 0.0), sq(cols, 0.0);
  std::size_t n = 0;
  for (const auto& s : train) {
    const auto& t = horizontal ? s.horizontal : s.vertical;
    for (std::size_t r = 0; r < t.dim(0); ++r) {
      for (std::size_t c = 0; c < cols; ++c) sum[c] += t.at(r, c);
      ++n;
    }
  }
  sc.mean.resize(cols);
  sc.std.resize(cols);
  for (std::size_t c = 0; c < cols; ++c) sc.mean[c] = sum[c] / static_cast<double>(n);
  for (const auto& s : train) {
    const auto& t = horizontal ? s.horizontal : s.vertical;
    for (std::size_t r = 0; r < t.dim(0); ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        const double e = t.at(r, c) - sc.mean[c];
        sq[c] += e * e;
      }
  }
  for (std::size_t c = 0; c < cols; ++c) {
    const double sd = std::sqrt(sq[c] / static_cast<double>(n));
    sc.std[c] = sd > 0 ? sd : 1.0;  // constant column: centre only
  }
  return sc;
}
}  // namespace

Scaler fit_scaler(const std::vector<SequenceSample>& train) {
  Scaler s;
  s.horizontal = fit_columns(train, true);
  s.vertical = fit_columns(train, false);
  double sum = 0, sq = 0;
  for (const auto& x : train) sum += x.target_plf;
  const double n = static_cast<double>(std::max<std::size_t>(train.size(), 1));
  s.target_mean = sum / n;
  for (const auto& x : train) sq += (x.target_plf - s.target_mean) * (x.target_plf - s.target_mean);
  const double sd = std::sqrt(sq / n);
  s.target_std = sd > 0 ? sd : 1.0;
  return s;
}

std::string to_string(Partition p) {
  switch (p) {
    case Partition::Train: return "train";
    case Partition::Validation: return "validation";
    case Partition::Test: return "test";
  }
  return "train";
}

SplitCorpus chronological_split(std::vector<SequenceSample> samples, SplitRatios ratios, bool standardize) {
  const double total = ratios.train + ratios.validation + ratios.test;
  if (std::abs(total - 1.0) > 1e-9 || ratios.train <= 0 || ratios.validation < 0 || ratios.test < 0)
    throw Error(ErrorCode::InvalidConfig, "split ratios must be non-negative and sum to 1");

  std::stable_sort(samples.begin(), samples.end(),
                   [](const auto& a, const auto& b) { return a.flight_date < b.flight_date; });
  const std::size_t n = samples.size();

  // Snap a nominal cut to the end of its flight-date group.
  auto snap = [&](std::size_t cut) {
    if (cut == 0 || cut >= n) return std::min(cut, n);
    const Date boundary = samples[cut - 1].flight_date;
    while (cut < n && samples[cut].flight_date == boundary) ++cut;
    return cut;
  };
  const auto nominal_train = static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(n)));
  const auto nominal_val =
      static_cast<std::size_t>(std::llround((ratios.train + ratios.validation) * static_cast<double>(n)));
  const std::size_t cut1 = snap(nominal_train);
  const std::size_t cut2 = std::max(cut1, snap(nominal_val));

  SplitCorpus out;
  out.train.assign(std::make_move_iterator(samples.begin()), std::make_move_iterator(samples.begin() + cut1));
  out.validation.assign(std::make_move_iterator(samples.begin() + cut1),
                        std::make_move_iterator(samples.begin() + cut2));
  out.test.assign(std::make_move_iterator(samples.begin() + cut2), std::make_move_iterator(samples.end()));
  if (out.train.empty() || out.validation.empty() || out.test.empty())
    throw Error(ErrorCode::EmptyPartition, "split produced sizes " + std::to_string(out.train.size()) + "/" +
                                               std::to_string(out.validation.size()) + "/" +
                                               std::to_string(out.test.size()));

  out.scaler = fit_scaler(out.train);
  if (standardize) {
    for (auto* part : {&out.train, &out.validation, &out.test})
      for (auto& s : *part) out.scaler.transform(s);
    out.standardized = true;
  }
  return out;
}

void write_manifest(std::ostream& out, const SplitCorpus& corpus) {
  csv::Writer w(out);
  w.row({"route_id", "flight_date", "days_before_departure", "partition", "target_plf"});
  auto emit = [&](const std::vector<SequenceSample>& part, Partition p) {
    for (const auto& s : part)
      w.row({s.route_id, s.flight_date.iso(), std::to_string(s.days_before_departure), to_string(p),
             csv::format(s.target_plf)});
  };
  emit(corpus.train, Partition::Train);
  emit(corpus.validation, Partition::Validation);
  emit(corpus.test, Partition::Test);
}

void write_skip_counts(std::ostream& out, const SkipCounts& skipped) {
  csv::Writer w(out);
  w.row({"reason", "count"});
  w.row({"insufficient_horizontal", std::to_string(skipped.insufficient_horizontal)});
  w.row({"insufficient_vertical", std::to_string(skipped.insufficient_vertical)});
  w.row({"missing_target", std::to_string(skipped.missing_target)});
}

// ---------------------------------------------------------------------------
// Binary cache

namespace {
static_assert(std::endian::native == std::endian::little, "sample cache assumes a little-endian host");
constexpr char kCacheMagic[8] = {'L', 'C', 'S', 'A', 'M', 'P', 'v', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw Error(ErrorCode::BadFormat, "truncated sample cache");
  return v;
}
void put_doubles(std::ostream& out, std::span<const double> xs) {
  out.write(reinterpret_cast<const char*>(xs.data()), static_cast<std::streamsize>(xs.size() * sizeof(double)));
}
void get_doubles(std::istream& in, std::span<double> xs) {
  in.read(reinterpret_cast<char*>(xs.data()), static_cast<std::streamsize>(xs.size() * sizeof(double)));
  if (!in) throw Error(ErrorCode::BadFormat, "truncated sample cache");
}
}  // namespace

void write_sample_cache(const std::filesystem::path& path, const SplitCorpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MissingInput, "cannot write " + path.string());
  out.write(kCacheMagic, sizeof kCacheMagic);
  const auto count = corpus.train.size() + corpus.validation.size() + corpus.test.size();
  const SequenceSample* any = !corpus.train.empty() ? &corpus.train.front() : nullptr;
  const std::uint32_t H = any ? static_cast<std::uint32_t>(any->horizontal.dim(0)) : 0;
  const std::uint32_t Fh = any ? static_cast<std::uint32_t>(any->horizontal.dim(1)) : 0;
  const std::uint32_t V = any ? static_cast<std::uint32_t>(any->vertical.dim(0)) : 0;
  const std::uint32_t Fv = any ? static_cast<std::uint32_t>(any->vertical.dim(1)) : 0;
  put<std::uint64_t>(out, count);
  put(out, H);
  put(out, Fh);
  put(out, V);
  put(out, Fv);
  auto emit = [&](const std::vector<SequenceSample>& part, Partition p) {
    for (const auto& s : part) {
      put<std::uint8_t>(out, static_cast<std::uint8_t>(p));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(s.route_id.size()));
      out.write(s.route_id.data(), static_cast<std::streamsize>(s.route_id.size()));
      put<std::int64_t>(out, s.flight_date.serial());
      put<std::int32_t>(out, s.days_before_departure);
      put(out, s.target_plf);
      put(out, s.naive_plf);
      put_doubles(out, s.horizontal.data());
      put_doubles(out, s.vertical.data());
    }
  };
  emit(corpus.train, Partition::Train);
  emit(corpus.validation, Partition::Validation);
  emit(corpus.test, Partition::Test);
  put<std::uint8_t>(out, corpus.standardized ? 1 : 0);
  put_doubles(out, corpus.scaler.horizontal.mean);
  put_doubles(out, corpus.scaler.horizontal.std);
  put_doubles(out, corpus.scaler.vertical.mean);
  put_doubles(out, corpus.scaler.vertical.std);
  put(out, corpus.scaler.target_mean);
  put(out, corpus.scaler.target_std);
}

SplitCorpus read_sample_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCacheMagic, sizeof magic) != 0)
    throw Error(ErrorCode::BadFormat, path.string() + " is not a sample cache");
  const auto count = get<std::uint64_t>(in);
  const auto H = get<std::uint32_t>(in), Fh = get<std::uint32_t>(in);
  const auto V = get<std::uint32_t>(in), Fv = get<std::uint32_t>(in);
  SplitCorpus corpus;
  for (std::uint64_t i = 0; i < count; ++i) {
    SequenceSample s;
    const auto p = static_cast<Partition>(get<std::uint8_t>(in));
    const auto len = get<std::uint32_t>(in);
    s.route_id.resize(len);
    in.read(s.route_id.data(), len);
    s.flight_date = Date(std::chrono::sys_days(std::chrono::days(get<std::int64_t>(in))));
    s.days_before_departure = get<std::int32_t>(in);
    s.target_plf = get<double>(in);
    s.naive_plf = get<double>(in);
    s.horizontal = Tensor({H, Fh});
    s.vertical = Tensor({V, Fv});
    get_doubles(in, s.horizontal.data());
    get_doubles(in, s.vertical.data());
    switch (p) {
      case Partition::Train: corpus.train.push_back(std::move(s)); break;
      case Partition::Validation: corpus.validation.push_back(std::move(s)); break;
      case Partition::Test: corpus.test.push_back(std::move(s)); break;
    }
  }
  corpus.standardized = get<std::uint8_t>(in) != 0;
  corpus.scaler.horizontal.mean.resize(Fh);
  corpus.scaler.horizontal.std.resize(Fh);
  corpus.scaler.vertical.mean.resize(Fv);
  corpus.scaler.vertical.std.resize(Fv);
  get_doubles(in, corpus.scaler.horizontal.mean);
  get_doubles(in, corpus.scaler.horizontal.std);
  get_doubles(in, corpus.scaler.vertical.mean);
  get_doubles(in, corpus.scaler.vertical.std);
  corpus.scaler.target_mean = get<double>(in);
  corpus.scaler.target_std = get<double>(in);
  return corpus;
}

}  // namespace loadcast
