#pragma once

#include <string>
#include <utility>
#include <vector>

#include "loadcast/random.hpp"
#include "loadcast/tensor.hpp"

namespace loadcast {

// A time-major batch: one B x D matrix per step, oldest step first.
using Sequence = std::vector<Matrix>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}
};

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
void xavier_uniform(Matrix& m, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);

double sigmoid(double x);

// Gate blocks are laid out column-wise as [i | f | o | g]; W is input x 4H,
// U is H x 4H, b is 1 x 4H.
class LstmLayer {
 public:
  LstmLayer(const std::string& name, int input_size, int hidden_size);

  int input_size() const { return input_; }
  int hidden_size() const { return hidden_; }
  void initialize(Rng& rng);  // Xavier weights, zero biases, forget bias 1

  Sequence forward(const Sequence& x);
  // `dh` holds the loss gradient for every output step (zeros where unused).
  // Accumulates parameter gradients and returns the input gradient.
  Sequence backward(const Sequence& dh);

  std::vector<Parameter*> parameters() { return {&W, &U, &b}; }

  Parameter W, U, b;

 private:
  int input_, hidden_;
  Matrix x_all_;
  Sequence h_, c_, i_, f_, o_, g_, tc_;
};

struct LstmState {
  Vector h;
  Vector c;
};

// One step of a single-sample cell.
LstmState lstm_cell(const Vector& x, const Vector& h_prev, const Vector& c_prev, const LstmLayer& layer);

enum class Activation { Linear, Relu };

class DenseLayer {
 public:
  DenseLayer(const std::string& name, int input_size, int output_size, Activation act);

  void initialize(Rng& rng);
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy);
  std::vector<Parameter*> parameters() { return {&W, &b}; }

  Parameter W, b;

 private:
  Activation act_;
  Matrix x_, z_;
};

// Inverted dropout: kept units are scaled by 1/(1-rate) during training.
class Dropout {
 public:
  explicit Dropout(double rate) : rate_(rate) {}

  Matrix forward(const Matrix& x, bool training, Rng* rng);
  Matrix backward(const Matrix& dy) const;

 private:
  double rate_;
  bool active_ = false;
  Matrix mask_;
};

// softmax(Q K^T / sqrt(D)) V for a single sample.
Matrix scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v, Matrix* weights = nullptr);

// Batched single-head attention with K = V = `context`. Self-attention is
// the case context == query.
class Attention {
 public:
  Sequence forward(const Sequence& query, const Sequence& context);
  // Returns (d query, d context).
  std::pair<Sequence, Sequence> backward(const Sequence& dout);

  // weights()[i][j] is the B-vector of weights of query step i on key j.
  const std::vector<std::vector<Vector>>& weights() const { return a_; }

 private:
  Sequence q_, kv_;
  std::vector<std::vector<Vector>> a_;
  double scale_ = 1.0;
};

// g = sigmoid([a b] W + b_g); out = g*a + (1-g)*b.
class GatedFusion {
 public:
  GatedFusion(const std::string& name, int width);

  void initialize(Rng& rng);
  Matrix forward(const Matrix& a, const Matrix& b);
  std::pair<Matrix, Matrix> backward(const Matrix& dout);
  const Matrix& gate() const { return g_; }
  std::vector<Parameter*> parameters() { return {&W, &bias}; }

  Parameter W, bias;

 private:
  int width_;
  Matrix a_, b_, g_;
};

// Single-vector forms used by callers outside a model.
Vector gated_fuse(const Vector& a, const Vector& b, const Matrix& w, const Vector& bias);
Vector residual_fuse(const Vector& attended, const Vector& original);

Matrix mean_pool(const Sequence& x);
Sequence mean_pool_backward(const Matrix& dy, std::size_t steps);

}  // namespace loadcast
