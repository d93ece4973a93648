#include "loadcast/layers.hpp"

#include <cmath>

#include "loadcast/error.hpp"

namespace loadcast {

namespace {

void require_width(const Matrix& m, Eigen::Index cols, const char* what) {
  if (m.cols() != cols)
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": expected width " + std::to_string(cols) +
                                              ", got " + std::to_string(m.cols()));
}

Matrix sigmoid(const Matrix& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

Vector row_dot(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).rowwise().sum(); }

}  // namespace

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void xavier_uniform(Matrix& m, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-limit, limit);
}

// ---------------------------------------------------------------- LSTM

LstmLayer::LstmLayer(const std::string& name, int input_size, int hidden_size)
    : W(name + ".W", input_size, 4 * hidden_size),
      U(name + ".U", hidden_size, 4 * hidden_size),
      b(name + ".b", 1, 4 * hidden_size),
      input_(input_size),
      hidden_(hidden_size) {
  if (input_size <= 0 || hidden_size <= 0) throw Error(ErrorCode::ShapeMismatch, "LSTM sizes must be positive");
}

void LstmLayer::initialize(Rng& rng) {
  xavier_uniform(W.value, input_, 4 * hidden_, rng);
  xavier_uniform(U.value, hidden_, 4 * hidden_, rng);
  b.value.setZero();
  b.value.block(0, hidden_, 1, hidden_).setOnes();
}

Sequence LstmLayer::forward(const Sequence& x) {
  if (x.empty()) throw Error(ErrorCode::ShapeMismatch, "LSTM needs at least one step");
  const auto batch = x.front().rows();
  const auto hs = static_cast<Eigen::Index>(hidden_);
  const auto steps = x.size();
  // Input projections for all steps in one product.
  x_all_.resize(batch * static_cast<Eigen::Index>(steps), input_);
  for (std::size_t t = 0; t < steps; ++t) {
    require_width(x[t], input_, "LSTM input");
    if (x[t].rows() != batch) throw Error(ErrorCode::ShapeMismatch, "LSTM batch size changes across steps");
    x_all_.middleRows(static_cast<Eigen::Index>(t) * batch, batch) = x[t];
  }
  Matrix z_all = x_all_ * W.value;
  z_all.rowwise() += b.value.row(0);
  h_.assign(steps, Matrix());
  c_.assign(steps, Matrix());
  i_.assign(steps, Matrix());
  f_.assign(steps, Matrix());
  o_.assign(steps, Matrix());
  g_.assign(steps, Matrix());
  tc_.assign(steps, Matrix());
  Matrix c = Matrix::Zero(batch, hs);
  Matrix z(batch, 4 * hs);
  for (std::size_t t = 0; t < steps; ++t) {
    z = z_all.middleRows(static_cast<Eigen::Index>(t) * batch, batch);
    if (t > 0) z.noalias() += h_[t - 1] * U.value;
    i_[t] = sigmoid(Matrix(z.middleCols(0, hs)));
    f_[t] = sigmoid(Matrix(z.middleCols(hs, hs)));
    o_[t] = sigmoid(Matrix(z.middleCols(2 * hs, hs)));
    g_[t] = z.middleCols(3 * hs, hs).array().tanh().matrix();
    c = (f_[t].array() * c.array() + i_[t].array() * g_[t].array()).matrix();
    tc_[t] = c.array().tanh().matrix();
    h_[t] = (o_[t].array() * tc_[t].array()).matrix();
    c_[t] = c;
  }
  return h_;
}

Sequence LstmLayer::backward(const Sequence& dh) {
  const auto steps = h_.size();
  if (dh.size() != steps) throw Error(ErrorCode::ShapeMismatch, "LSTM backward step count");
  const auto batch = h_.front().rows();
  const auto hs = static_cast<Eigen::Index>(hidden_);
  Matrix dz_all(batch * static_cast<Eigen::Index>(steps), 4 * hs);
  Matrix dh_next = Matrix::Zero(batch, hs);
  Matrix dc_next = Matrix::Zero(batch, hs);
  for (std::size_t s = steps; s-- > 0;) {
    auto dz = dz_all.middleRows(static_cast<Eigen::Index>(s) * batch, batch);
    const Matrix dht = dh[s] + dh_next;
    const auto tc = tc_[s].array();
    const Matrix dc = (dht.array() * o_[s].array() * (1.0 - tc.square()) + dc_next.array()).matrix();
    dz.middleCols(0, hs) = (dc.array() * g_[s].array() * i_[s].array() * (1.0 - i_[s].array())).matrix();
    if (s > 0)
      dz.middleCols(hs, hs) = (dc.array() * c_[s - 1].array() * f_[s].array() * (1.0 - f_[s].array())).matrix();
    else
      dz.middleCols(hs, hs).setZero();
    dz.middleCols(2 * hs, hs) = (dht.array() * tc * o_[s].array() * (1.0 - o_[s].array())).matrix();
    dz.middleCols(3 * hs, hs) = (dc.array() * i_[s].array() * (1.0 - g_[s].array().square())).matrix();
    if (s > 0) {
      dc_next = (dc.array() * f_[s].array()).matrix();
      dh_next.noalias() = dz * U.value.transpose();
      U.grad.noalias() += h_[s - 1].transpose() * dz;
    }
  }
  W.grad.noalias() += x_all_.transpose() * dz_all;
  b.grad.row(0) += dz_all.colwise().sum();
  const Matrix dx_all = dz_all * W.value.transpose();
  Sequence dx(steps);
  for (std::size_t s = 0; s < steps; ++s) dx[s] = dx_all.middleRows(static_cast<Eigen::Index>(s) * batch, batch);
  return dx;
}

LstmState lstm_cell(const Vector& x, const Vector& h_prev, const Vector& c_prev, const LstmLayer& layer) {
  const auto hs = static_cast<Eigen::Index>(layer.hidden_size());
  if (x.size() != layer.input_size() || h_prev.size() != hs || c_prev.size() != hs)
    throw Error(ErrorCode::ShapeMismatch, "lstm_cell operand sizes");
  const Vector z = layer.W.value.transpose() * x + layer.U.value.transpose() * h_prev +
                   layer.b.value.row(0).transpose();
  LstmState out{Vector(hs), Vector(hs)};
  for (Eigen::Index k = 0; k < hs; ++k) {
    const double i = sigmoid(z[k]);
    const double f = sigmoid(z[hs + k]);
    const double o = sigmoid(z[2 * hs + k]);
    const double g = std::tanh(z[3 * hs + k]);
    out.c[k] = f * c_prev[k] + i * g;
    out.h[k] = o * std::tanh(out.c[k]);
  }
  return out;
}

// ---------------------------------------------------------------- Dense

DenseLayer::DenseLayer(const std::string& name, int input_size, int output_size, Activation act)
    : W(name + ".W", input_size, output_size), b(name + ".b", 1, output_size), act_(act) {
  if (input_size <= 0 || output_size <= 0) throw Error(ErrorCode::ShapeMismatch, "dense sizes must be positive");
}

void DenseLayer::initialize(Rng& rng) {
  xavier_uniform(W.value, W.value.rows(), W.value.cols(), rng);
  b.value.setZero();
}

Matrix DenseLayer::forward(const Matrix& x) {
  require_width(x, W.value.rows(), "dense input");
  x_ = x;
  z_.noalias() = x * W.value;
  z_.rowwise() += b.value.row(0);
  if (act_ == Activation::Relu) return z_.cwiseMax(0.0);
  return z_;
}

Matrix DenseLayer::backward(const Matrix& dy) {
  Matrix dz = dy;
  if (act_ == Activation::Relu) dz = (z_.array() > 0.0).select(dy, 0.0);
  W.grad.noalias() += x_.transpose() * dz;
  b.grad.row(0) += dz.colwise().sum();
  return dz * W.value.transpose();
}

// ---------------------------------------------------------------- Dropout

Matrix Dropout::forward(const Matrix& x, bool training, Rng* rng) {
  active_ = training && rate_ > 0.0;
  if (!active_) return x;
  if (rng == nullptr) throw Error(ErrorCode::InvalidConfig, "training dropout needs a random generator");
  const double keep = 1.0 - rate_;
  mask_.resize(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) mask_(r, c) = rng->uniform() < keep ? 1.0 / keep : 0.0;
  return x.cwiseProduct(mask_);
}

Matrix Dropout::backward(const Matrix& dy) const { return active_ ? Matrix(dy.cwiseProduct(mask_)) : dy; }

// ---------------------------------------------------------------- Attention

Matrix scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v, Matrix* weights) {
  if (q.cols() == 0) throw Error(ErrorCode::ShapeMismatch, "attention width must be positive");
  if (k.cols() != q.cols() || v.rows() != k.rows())
    throw Error(ErrorCode::ShapeMismatch, "attention operand shapes");
  Matrix s = q * k.transpose() / std::sqrt(static_cast<double>(q.cols()));
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    s.row(r).array() -= s.row(r).maxCoeff();
    s.row(r) = s.row(r).array().exp().matrix();
    s.row(r) /= s.row(r).sum();
  }
  if (weights) *weights = s;
  return s * v;
}

Sequence Attention::forward(const Sequence& query, const Sequence& context) {
  if (query.empty() || context.empty()) throw Error(ErrorCode::ShapeMismatch, "attention needs non-empty sequences");
  const auto width = query.front().cols();
  for (const auto& m : context) require_width(m, width, "attention context");
  for (const auto& m : query) require_width(m, width, "attention query");
  q_ = query;
  kv_ = context;
  scale_ = 1.0 / std::sqrt(static_cast<double>(width));
  const auto tq = query.size(), tk = context.size();
  const auto batch = query.front().rows();
  a_.assign(tq, std::vector<Vector>(tk));
  Sequence out(tq);
  for (std::size_t i = 0; i < tq; ++i) {
    Vector mx = Vector::Constant(batch, -std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < tk; ++j) {
      a_[i][j] = row_dot(query[i], context[j]) * scale_;
      mx = mx.cwiseMax(a_[i][j]);
    }
    Vector total = Vector::Zero(batch);
    for (std::size_t j = 0; j < tk; ++j) {
      a_[i][j] = (a_[i][j] - mx).array().exp().matrix();
      total += a_[i][j];
    }
    out[i] = Matrix::Zero(batch, width);
    for (std::size_t j = 0; j < tk; ++j) {
      a_[i][j] = a_[i][j].cwiseQuotient(total);
      out[i].array() += context[j].array().colwise() * a_[i][j].array();
    }
  }
  return out;
}

std::pair<Sequence, Sequence> Attention::backward(const Sequence& dout) {
  const auto tq = q_.size(), tk = kv_.size();
  const auto batch = q_.front().rows();
  const auto width = q_.front().cols();
  Sequence dq(tq, Matrix::Zero(batch, width));
  Sequence dkv(tk, Matrix::Zero(batch, width));
  std::vector<Vector> da(tk);
  for (std::size_t i = 0; i < tq; ++i) {
    Vector weighted = Vector::Zero(batch);
    for (std::size_t j = 0; j < tk; ++j) {
      da[j] = row_dot(dout[i], kv_[j]);
      weighted += a_[i][j].cwiseProduct(da[j]);
      dkv[j].array() += dout[i].array().colwise() * a_[i][j].array();  // value path
    }
    for (std::size_t j = 0; j < tk; ++j) {
      const Vector ds = (a_[i][j].cwiseProduct(da[j] - weighted)) * scale_;
      dq[i].array() += kv_[j].array().colwise() * ds.array();
      dkv[j].array() += q_[i].array().colwise() * ds.array();  // key path
    }
  }
  return {std::move(dq), std::move(dkv)};
}

// ---------------------------------------------------------------- Gated fusion

GatedFusion::GatedFusion(const std::string& name, int width)
    : W(name + ".W", 2 * width, width), bias(name + ".b", 1, width), width_(width) {}

void GatedFusion::initialize(Rng& rng) {
  xavier_uniform(W.value, 2 * width_, width_, rng);
  bias.value.setZero();
}

Matrix GatedFusion::forward(const Matrix& a, const Matrix& b) {
  require_width(a, width_, "gate input a");
  require_width(b, width_, "gate input b");
  a_ = a;
  b_ = b;
  Matrix z = a * W.value.topRows(width_) + b * W.value.bottomRows(width_);
  z.rowwise() += bias.value.row(0);
  g_ = sigmoid(z);
  return (g_.array() * a.array() + (1.0 - g_.array()) * b.array()).matrix();
}

std::pair<Matrix, Matrix> GatedFusion::backward(const Matrix& dout) {
  const Matrix dz = (dout.array() * (a_ - b_).array() * g_.array() * (1.0 - g_.array())).matrix();
  W.grad.topRows(width_).noalias() += a_.transpose() * dz;
  W.grad.bottomRows(width_).noalias() += b_.transpose() * dz;
  bias.grad.row(0) += dz.colwise().sum();
  Matrix da = (dout.array() * g_.array()).matrix();
  Matrix db = (dout.array() * (1.0 - g_.array())).matrix();
  da.noalias() += dz * W.value.topRows(width_).transpose();
  db.noalias() += dz * W.value.bottomRows(width_).transpose();
  return {std::move(da), std::move(db)};
}

Vector gated_fuse(const Vector& a, const Vector& b, const Matrix& w, const Vector& bias) {
  const auto d = a.size();
  if (b.size() != d || w.rows() != 2 * d || w.cols() != d || bias.size() != d)
    throw Error(ErrorCode::ShapeMismatch, "gated_fuse operand sizes");
  Vector ab(2 * d);
  ab << a, b;
  const Vector z = w.transpose() * ab + bias;
  Vector out(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double g = sigmoid(z[k]);
    out[k] = g * a[k] + (1.0 - g) * b[k];
  }
  return out;
}

Vector residual_fuse(const Vector& attended, const Vector& original) {
  if (attended.size() != original.size()) throw Error(ErrorCode::ShapeMismatch, "residual_fuse widths differ");
  return attended + original;
}

Matrix mean_pool(const Sequence& x) {
  Matrix out = x.front();
  for (std::size_t t = 1; t < x.size(); ++t) out += x[t];
  return out / static_cast<double>(x.size());
}

Sequence mean_pool_backward(const Matrix& dy, std::size_t steps) {
  return Sequence(steps, dy / static_cast<double>(steps));
}

}  // namespace loadcast
