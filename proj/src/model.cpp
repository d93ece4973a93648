#include "loadcast/model.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "loadcast/error.hpp"

namespace loadcast {

namespace {

struct VariantName {
  Variant variant;
  const char* name;
};
constexpr std::array<VariantName, 10> kVariantNames{{
    {Variant::SlstmH, "SLSTM-H"},
    {Variant::SlstmV, "SLSTM-V"},
    {Variant::SlstmC, "SLSTM-C"},
    {Variant::Dlstm, "DLSTM"},
    {Variant::DlstmSA, "DLSTM-SA"},
    {Variant::DlstmCA, "DLSTM-CA"},
    {Variant::DlstmHA, "DLSTM-HA"},
    {Variant::DlstmHAGF, "DLSTM-HAGF"},
    {Variant::DlstmHARF, "DLSTM-HARF"},
    {Variant::DlstmHAGFRF, "DLSTM-HAGFRF"},
}};

bool gated(Variant v) { return v == Variant::DlstmHAGF || v == Variant::DlstmHAGFRF; }
bool hybrid(Variant v) {
  return v == Variant::DlstmHA || v == Variant::DlstmHAGF || v == Variant::DlstmHARF || v == Variant::DlstmHAGFRF;
}

std::size_t lstm_count(std::size_t in, const std::vector<int>& units) {
  std::size_t total = 0;
  for (int u : units) {
    const auto h = static_cast<std::size_t>(u);
    total += 4 * h * (in + h + 1);
    in = h;
  }
  return total;
}

int head_input(const ModelSpec& s) {
  const int last = s.lstm_units.back();
  if (!is_dual(s.variant) || gated(s.variant)) return last;
  return 2 * last;
}

Sequence add(const Sequence& a, const Sequence& b) {
  Sequence out(a.size());
  for (std::size_t t = 0; t < a.size(); ++t) out[t] = a[t] + b[t];
  return out;
}

Sequence last_only(const Matrix& d, std::size_t steps) {
  Sequence out(steps, Matrix::Zero(d.rows(), d.cols()));
  out.back() = d;
  return out;
}

}  // namespace

std::string to_string(Variant v) {
  for (const auto& e : kVariantNames)
    if (e.variant == v) return e.name;
  return "?";
}

Variant variant_from_name(const std::string& name) {
  for (const auto& e : kVariantNames)
    if (name == e.name) return e.variant;
  throw Error(ErrorCode::IllegalSpec, "unknown model variant '" + name + "'");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> all = [] {
    std::vector<Variant> v;
    for (const auto& e : kVariantNames) v.push_back(e.variant);
    return v;
  }();
  return all;
}

bool is_dual(Variant v) { return v != Variant::SlstmH && v != Variant::SlstmV && v != Variant::SlstmC; }
bool uses_attention(Variant v) { return is_dual(v) && v != Variant::Dlstm; }

std::string to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "Adam" : "RMSprop"; }

OptimizerKind optimizer_from_name(const std::string& name) {
  if (name == "Adam" || name == "adam") return OptimizerKind::Adam;
  if (name == "RMSprop" || name == "rmsprop") return OptimizerKind::RMSprop;
  throw Error(ErrorCode::IllegalSpec, "unknown optimizer '" + name + "'");
}

ModelSpec reference_spec(Variant v, int fh, int fv, int hsteps, int vsteps) {
  ModelSpec s;
  s.variant = v;
  s.horizontal_features = fh;
  s.vertical_features = fv;
  s.horizontal_steps = hsteps;
  s.vertical_steps = vsteps;
  switch (v) {
    case Variant::SlstmH:
      s.lstm_units = {96, 96};
      break;
    case Variant::SlstmV:
    case Variant::SlstmC:
      s.lstm_units = {128};
      s.optimizer = OptimizerKind::RMSprop;
      s.learning_rate = 0.001318;
      break;
    case Variant::Dlstm:
      s.lstm_units = {96, 32};
      break;
    default:
      s.lstm_units = {64, 64};
      s.dropout = 0.3;
      s.dense_units = {128, 32};
      break;
  }
  return s;
}

void validate(const ModelSpec& s) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::IllegalSpec, msg); };
  if (s.lstm_units.empty()) fail("at least one LSTM layer is required");
  for (int u : s.lstm_units)
    if (u <= 0) fail("LSTM widths must be positive");
  for (int u : s.dense_units)
    if (u <= 0) fail("dense widths must be positive");
  if (!(s.dropout >= 0.0 && s.dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (!(s.learning_rate > 0.0)) fail("learning rate must be positive");
  if (s.horizontal_features <= 0 || s.vertical_features <= 0) fail("feature widths must be positive");
  if (s.horizontal_steps <= 0 || s.vertical_steps <= 0) fail("window lengths must be positive");
}

std::size_t parameter_count(const ModelSpec& s) {
  validate(s);
  const auto fh = static_cast<std::size_t>(s.horizontal_features);
  const auto fv = static_cast<std::size_t>(s.vertical_features);
  std::size_t total = 0;
  switch (s.variant) {
    case Variant::SlstmH: total += lstm_count(fh, s.lstm_units); break;
    case Variant::SlstmV: total += lstm_count(fv, s.lstm_units); break;
    case Variant::SlstmC: total += lstm_count(fh + fv, s.lstm_units); break;
    default: total += lstm_count(fh, s.lstm_units) + lstm_count(fv, s.lstm_units); break;
  }
  if (gated(s.variant)) {
    const auto d = static_cast<std::size_t>(s.lstm_units.back());
    total += d * (2 * d + 1);
  }
  auto in = static_cast<std::size_t>(head_input(s));
  for (int u : s.dense_units) {
    total += static_cast<std::size_t>(u) * (in + 1);
    in = static_cast<std::size_t>(u);
  }
  return total + in + 1;
}

// ---------------------------------------------------------------- data

SequenceData to_sequence_data(const std::vector<SequenceSample>& samples, const Scaler& scaler) {
  SequenceData out;
  const auto n = static_cast<Eigen::Index>(samples.size());
  out.target.resize(n);
  out.target_plf.resize(n);
  out.naive_plf.resize(n);
  if (samples.empty()) return out;
  const auto& first = samples.front();
  const auto hs = first.horizontal.dim(0), fh = first.horizontal.dim(1);
  const auto vs = first.vertical.dim(0), fv = first.vertical.dim(1);
  out.horizontal.assign(hs, Matrix(n, static_cast<Eigen::Index>(fh)));
  out.vertical.assign(vs, Matrix(n, static_cast<Eigen::Index>(fv)));
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& s = samples[static_cast<std::size_t>(r)];
    if (s.horizontal.shape() != first.horizontal.shape() || s.vertical.shape() != first.vertical.shape())
      throw Error(ErrorCode::ShapeMismatch, "samples disagree on window shapes");
    for (std::size_t t = 0; t < hs; ++t)
      for (std::size_t c = 0; c < fh; ++c) out.horizontal[t](r, static_cast<Eigen::Index>(c)) = s.horizontal.at(t, c);
    for (std::size_t t = 0; t < vs; ++t)
      for (std::size_t c = 0; c < fv; ++c) out.vertical[t](r, static_cast<Eigen::Index>(c)) = s.vertical.at(t, c);
    out.target[r] = scaler.scale_target(s.target_plf);
    out.target_plf[r] = s.target_plf;
    out.naive_plf[r] = s.naive_plf;
  }
  return out;
}

Batch gather(const SequenceData& data, std::span<const std::size_t> rows) {
  Batch b;
  auto take = [&](const Sequence& src, Sequence& dst) {
    dst.assign(src.size(), Matrix());
    for (std::size_t t = 0; t < src.size(); ++t) {
      dst[t].resize(static_cast<Eigen::Index>(rows.size()), src[t].cols());
      for (std::size_t i = 0; i < rows.size(); ++i)
        dst[t].row(static_cast<Eigen::Index>(i)) = src[t].row(static_cast<Eigen::Index>(rows[i]));
    }
  };
  take(data.horizontal, b.horizontal);
  take(data.vertical, b.vertical);
  return b;
}

// ---------------------------------------------------------------- model

Sequence Model::Branch::forward(const Sequence& x) {
  Sequence y = x;
  for (auto& layer : layers) y = layer.forward(y);
  return y;
}

Sequence Model::Branch::backward(const Sequence& dy) {
  Sequence d = dy;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) d = it->backward(d);
  return d;
}

Model::Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)), dropout_(spec_.dropout) {
  validate(spec_);
  const auto v = spec_.variant;
  auto build = [&](Branch& branch, const std::string& prefix, int input) {
    for (std::size_t l = 0; l < spec_.lstm_units.size(); ++l) {
      branch.layers.emplace_back(prefix + std::to_string(l), input, spec_.lstm_units[l]);
      input = spec_.lstm_units[l];
    }
  };
  switch (v) {
    case Variant::SlstmH: build(first_, "h_lstm", spec_.horizontal_features); break;
    case Variant::SlstmV: build(first_, "v_lstm", spec_.vertical_features); break;
    case Variant::SlstmC: build(first_, "c_lstm", spec_.horizontal_features + spec_.vertical_features); break;
    default:
      build(first_, "h_lstm", spec_.horizontal_features);
      build(second_, "v_lstm", spec_.vertical_features);
      break;
  }
  if (gated(v)) gate_.emplace("gate", spec_.lstm_units.back());
  int in = head_input(spec_);
  for (std::size_t k = 0; k < spec_.dense_units.size(); ++k) {
    head_.emplace_back("dense" + std::to_string(k), in, spec_.dense_units[k], Activation::Relu);
    in = spec_.dense_units[k];
  }
  head_.emplace_back("out", in, 1, Activation::Linear);

  Rng rng(seed);
  for (auto& l : first_.layers) l.initialize(rng);
  for (auto& l : second_.layers) l.initialize(rng);
  if (gate_) gate_->initialize(rng);
  for (auto& d : head_) d.initialize(rng);
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  auto append = [&](std::vector<Parameter*> ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  for (auto& l : first_.layers) append(l.parameters());
  for (auto& l : second_.layers) append(l.parameters());
  if (gate_) append(gate_->parameters());
  for (auto& d : head_) append(d.parameters());
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  auto ps = const_cast<Model*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void Model::zero_grad() {
  for (auto* p : parameters()) p->grad.setZero();
}

std::vector<const Attention*> Model::attentions() const {
  switch (spec_.variant) {
    case Variant::DlstmSA: return {&self_h_, &self_v_};
    case Variant::DlstmCA: return {&cross_h_, &cross_v_};
    default:
      if (hybrid(spec_.variant)) return {&self_h_, &self_v_, &cross_h_, &cross_v_};
      return {};
  }
}

// The shorter stream is zero-filled at its oldest steps so both end on the
// most recent step.
Sequence Model::concat_streams(const Batch& batch) const {
  const auto hs = batch.horizontal.size(), vs = batch.vertical.size();
  const auto steps = std::max(hs, vs);
  const auto rows = batch.horizontal.front().rows();
  const auto fh = static_cast<Eigen::Index>(spec_.horizontal_features);
  const auto fv = static_cast<Eigen::Index>(spec_.vertical_features);
  Sequence out(steps, Matrix::Zero(rows, fh + fv));
  for (std::size_t t = 0; t < hs; ++t) out[steps - hs + t].leftCols(fh) = batch.horizontal[t];
  for (std::size_t t = 0; t < vs; ++t) out[steps - vs + t].rightCols(fv) = batch.vertical[t];
  return out;
}

Matrix Model::encode(const Batch& batch) {
  const auto v = spec_.variant;
  h_steps_ = batch.horizontal.size();
  v_steps_ = batch.vertical.size();
  if (h_steps_ == 0 || v_steps_ == 0) throw Error(ErrorCode::ShapeMismatch, "empty window");
  switch (v) {
    case Variant::SlstmH: return first_.forward(batch.horizontal).back();
    case Variant::SlstmV: return first_.forward(batch.vertical).back();
    case Variant::SlstmC: {
      auto x = concat_streams(batch);
      c_steps_ = x.size();
      return first_.forward(x).back();
    }
    default: break;
  }
  hs_ = first_.forward(batch.horizontal);
  vs_ = second_.forward(batch.vertical);
  if (v == Variant::Dlstm) {
    Matrix rep(hs_.back().rows(), hs_.back().cols() + vs_.back().cols());
    rep << hs_.back(), vs_.back();
    return rep;
  }
  if (v == Variant::DlstmSA) {
    ha_ = self_h_.forward(hs_, hs_);
    va_ = self_v_.forward(vs_, vs_);
  } else if (v == Variant::DlstmCA) {
    ha_ = cross_h_.forward(hs_, vs_);
    va_ = cross_v_.forward(vs_, hs_);
  } else {
    const auto h1 = self_h_.forward(hs_, hs_);
    const auto v1 = self_v_.forward(vs_, vs_);
    ha_ = cross_h_.forward(h1, v1);
    va_ = cross_v_.forward(v1, h1);
  }
  Matrix ph, pv;
  if (v == Variant::DlstmHARF) {
    ph = mean_pool(add(ha_, hs_));
    pv = mean_pool(add(va_, vs_));
  } else {
    ph = mean_pool(ha_);
    pv = mean_pool(va_);
  }
  if (gated(v)) {
    Matrix rep = gate_->forward(ph, pv);
    if (v == Variant::DlstmHAGFRF) rep += mean_pool(hs_) + mean_pool(vs_);
    return rep;
  }
  Matrix rep(ph.rows(), ph.cols() + pv.cols());
  rep << ph, pv;
  return rep;
}

void Model::encode_backward(const Matrix& drep) {
  const auto v = spec_.variant;
  switch (v) {
    case Variant::SlstmH: first_.backward(last_only(drep, h_steps_)); return;
    case Variant::SlstmV: first_.backward(last_only(drep, v_steps_)); return;
    case Variant::SlstmC: first_.backward(last_only(drep, c_steps_)); return;
    default: break;
  }
  const auto width = hs_.back().cols();
  if (v == Variant::Dlstm) {
    first_.backward(last_only(drep.leftCols(width), h_steps_));
    second_.backward(last_only(drep.rightCols(width), v_steps_));
    return;
  }
  Matrix dph, dpv;
  Sequence dhs(h_steps_, Matrix::Zero(drep.rows(), width));
  Sequence dvs(v_steps_, Matrix::Zero(drep.rows(), width));
  if (gated(v)) {
    std::tie(dph, dpv) = gate_->backward(drep);
    if (v == Variant::DlstmHAGFRF) {
      dhs = mean_pool_backward(drep, h_steps_);
      dvs = mean_pool_backward(drep, v_steps_);
    }
  } else {
    dph = drep.leftCols(width);
    dpv = drep.rightCols(width);
  }
  const auto dha = mean_pool_backward(dph, h_steps_);
  const auto dva = mean_pool_backward(dpv, v_steps_);
  if (v == Variant::DlstmHARF) {
    dhs = add(dhs, dha);
    dvs = add(dvs, dva);
  }
  if (v == Variant::DlstmSA) {
    auto [dq_h, dc_h] = self_h_.backward(dha);
    auto [dq_v, dc_v] = self_v_.backward(dva);
    dhs = add(dhs, add(dq_h, dc_h));
    dvs = add(dvs, add(dq_v, dc_v));
  } else if (v == Variant::DlstmCA) {
    auto [dq_h, dc_v] = cross_h_.backward(dha);
    auto [dq_v, dc_h] = cross_v_.backward(dva);
    dhs = add(dhs, add(dq_h, dc_h));
    dvs = add(dvs, add(dq_v, dc_v));
  } else {
    auto [dq_h, dc_v] = cross_h_.backward(dha);
    auto [dq_v, dc_h] = cross_v_.backward(dva);
    auto [sq_h, sc_h] = self_h_.backward(add(dq_h, dc_h));
    auto [sq_v, sc_v] = self_v_.backward(add(dq_v, dc_v));
    dhs = add(dhs, add(sq_h, sc_h));
    dvs = add(dvs, add(sq_v, sc_v));
  }
  first_.backward(dhs);
  second_.backward(dvs);
}

Vector Model::forward(const Batch& batch, bool training, Rng* rng) {
  Matrix x = encode(batch);
  x = dropout_.forward(x, training, rng);
  for (auto& d : head_) x = d.forward(x);
  return x.col(0);
}

void Model::backward(const Vector& dpred) {
  Matrix d = dpred;
  for (auto it = head_.rbegin(); it != head_.rend(); ++it) d = it->backward(d);
  encode_backward(dropout_.backward(d));
}

}  // namespace loadcast
