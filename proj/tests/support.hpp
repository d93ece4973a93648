#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "loadcast/features.hpp"
#include "loadcast/ingest.hpp"
#include "loadcast/layers.hpp"
#include "loadcast/model.hpp"
#include "loadcast/random.hpp"
#include "loadcast/sequences.hpp"

namespace loadcast::testkit {

// Fresh directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(
                                                 std::chrono::steady_clock::now().time_since_epoch().count()));
    path_ = std::filesystem::temp_directory_path() / ("loadcast-" + tag + "-" + std::to_string(rng.next() % 1000000007));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

inline Sequence random_sequence(std::size_t steps, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Sequence s;
  for (std::size_t t = 0; t < steps; ++t) s.push_back(random_matrix(rows, cols, rng));
  return s;
}

// |a - n| / max(|a|, |n|, floor): relative error with an absolute floor so
// that exactly-zero gradients do not divide by zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central differences of `loss` against every entry of `values`; returns the
// worst relative error against the matching entries of `grads`.
inline double max_gradient_error(const std::vector<Matrix*>& values, const std::vector<const Matrix*>& grads,
                                 const std::function<double()>& loss, double step = 1e-5) {
  double worst = 0;
  for (std::size_t p = 0; p < values.size(); ++p) {
    Matrix& v = *values[p];
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double keep = v.data()[i];
      v.data()[i] = keep + step;
      const double up = loss();
      v.data()[i] = keep - step;
      const double down = loss();
      v.data()[i] = keep;
      worst = std::max(worst, relative_error(grads[p]->data()[i], (up - down) / (2 * step)));
    }
  }
  return worst;
}

inline double weighted_sum(const Matrix& out, const Matrix& weights) { return out.cwiseProduct(weights).sum(); }

inline double weighted_sum(const Sequence& out, const Sequence& weights) {
  double s = 0;
  for (std::size_t t = 0; t < out.size(); ++t) s += weighted_sum(out[t], weights[t]);
  return s;
}

// Random standardized-looking inputs shaped for `spec`.
inline Batch random_batch(const ModelSpec& spec, Eigen::Index rows, Rng& rng) {
  Batch b;
  b.horizontal = random_sequence(static_cast<std::size_t>(spec.horizontal_steps), rows, spec.horizontal_features, rng);
  b.vertical = random_sequence(static_cast<std::size_t>(spec.vertical_steps), rows, spec.vertical_features, rng);
  return b;
}

// Worst relative error between analytic and central-difference gradients of
// w . model(batch) over the model parameters. With `stride` > 1 only every
// stride-th entry of each parameter is probed.
inline double model_gradient_error(Model& model, const Batch& batch, const Vector& w, std::size_t stride = 1,
                                   double step = 1e-5) {
  model.zero_grad();
  model.forward(batch, false);
  model.backward(w);
  auto loss = [&] { return model.forward(batch, false).dot(w); };
  double worst = 0;
  for (auto* p : model.parameters()) {
    for (Eigen::Index i = 0; i < p->value.size(); i += static_cast<Eigen::Index>(stride)) {
      double& v = p->value.data()[i];
      const double keep = v;
      v = keep + step;
      const double up = loss();
      v = keep - step;
      const double down = loss();
      v = keep;
      worst = std::max(worst, relative_error(p->grad.data()[i], (up - down) / (2 * step)));
    }
  }
  return worst;
}

// Small widths keep the finite-difference sweep fast; structure is unchanged.
inline ModelSpec small_spec(Variant v, int fh = 3, int fv = 4, int hsteps = 3, int vsteps = 3) {
  ModelSpec s = reference_spec(v, fh, fv, hsteps, vsteps);
  s.lstm_units = s.lstm_units.size() > 1 ? std::vector<int>{5, 4} : std::vector<int>{5};
  if (uses_attention(v)) s.lstm_units = {4, 4};
  s.dense_units = s.dense_units.size() > 1 ? std::vector<int>{6, 5} : std::vector<int>{6};
  s.dropout = 0.0;
  return s;
}

// Feature table of the reference corpus (4 routes x 413 flights, seed 7).
inline const FeatureTable& reference_table() {
  static const FeatureTable table = [] {
    const auto corpus = generate_synthetic(GeneratorConfig{}, 7);
    return build_feature_rows(aggregate_legs(corpus.snapshots), corpus.routes, corpus.holidays);
  }();
  return table;
}

inline const std::vector<RouteMeta>& reference_routes() {
  static const std::vector<RouteMeta> routes = generate_synthetic(GeneratorConfig{}, 7).routes;
  return routes;
}

inline const SplitCorpus& reference_split() {
  static const SplitCorpus split = chronological_split(assemble_samples(reference_table()).samples);
  return split;
}

}  // namespace loadcast::testkit
