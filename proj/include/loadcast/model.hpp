#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadcast/layers.hpp"
#include "loadcast/sequences.hpp"

namespace loadcast {

enum class Variant {
  SlstmH,
  SlstmV,
  SlstmC,
  Dlstm,
  DlstmSA,
  DlstmCA,
  DlstmHA,
  DlstmHAGF,
  DlstmHARF,
  DlstmHAGFRF,
};
std::string to_string(Variant v);
Variant variant_from_name(const std::string& name);  // IllegalSpec on unknown names
const std::vector<Variant>& all_variants();
bool is_dual(Variant v);
bool uses_attention(Variant v);

enum class OptimizerKind { Adam, RMSprop };
std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_name(const std::string& name);

struct ModelSpec {
  Variant variant = Variant::SlstmH;
  std::vector<int> lstm_units{96, 96};  // stacked layer widths, identical for each branch
  double dropout = 0.1;
  std::vector<int> dense_units{32};     // ReLU layers before the linear output
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 0.004337;
  int horizontal_features = 8;
  int vertical_features = 9;
  int horizontal_steps = 3;
  int vertical_steps = 3;
};

// Published per-variant configuration for the given input shapes.
ModelSpec reference_spec(Variant v, int horizontal_features = 8, int vertical_features = 9,
                         int horizontal_steps = 3, int vertical_steps = 3);
void validate(const ModelSpec& spec);  // IllegalSpec

// Closed-form count:
//   lstm(in, h)  = 4h(in + h + 1), layers chained per branch
//   dense(in, o) = o(in + 1)
//   gate(D)      = D(2D + 1)
// Branch inputs: SLSTM-H -> F_h, SLSTM-V -> F_v, SLSTM-C -> F_h + F_v, dual -> both.
// Head input: last LSTM width L for single branch, 2L for concatenating dual
// variants, L for the gated ones.
std::size_t parameter_count(const ModelSpec& spec);

// Time-major batch.
struct Batch {
  Sequence horizontal;
  Sequence vertical;
};

// A partition laid out as time-major matrices over all samples.
struct SequenceData {
  Sequence horizontal;  // H steps of N x F_h
  Sequence vertical;    // V steps of N x F_v
  Vector target;        // standardized target
  Vector target_plf;    // target in PLF points
  Vector naive_plf;
  std::size_t size() const { return static_cast<std::size_t>(target.size()); }
};
SequenceData to_sequence_data(const std::vector<SequenceSample>& samples, const Scaler& scaler);
Batch gather(const SequenceData& data, std::span<const std::size_t> rows);

class Model {
 public:
  explicit Model(ModelSpec spec, std::uint64_t seed = 0);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelSpec& spec() const { return spec_; }

  // Standardized predictions, one per batch row. Dropout draws from `rng`
  // when training.
  Vector forward(const Batch& batch, bool training, Rng* rng = nullptr);
  // Accumulates parameter gradients for d loss / d prediction.
  void backward(const Vector& dpred);
  void zero_grad();

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;

  // Attention layers used in the last forward pass (empty for plain variants).
  std::vector<const Attention*> attentions() const;
  const GatedFusion* gate() const { return gate_ ? &*gate_ : nullptr; }

 private:
  struct Branch {
    std::vector<LstmLayer> layers;
    Sequence forward(const Sequence& x);
    Sequence backward(const Sequence& dy);
  };

  Matrix encode(const Batch& batch);
  void encode_backward(const Matrix& drep);
  Sequence concat_streams(const Batch& batch) const;

  ModelSpec spec_;
  Branch first_;   // horizontal, vertical (SLSTM-V) or concatenated (SLSTM-C)
  Branch second_;  // vertical branch of dual variants
  Attention self_h_, self_v_, cross_h_, cross_v_;
  std::optional<GatedFusion> gate_;
  Dropout dropout_;
  std::vector<DenseLayer> head_;

  // forward caches
  std::size_t h_steps_ = 0, v_steps_ = 0, c_steps_ = 0;
  Sequence hs_, vs_, ha_, va_;
};

// Checkpoint layout (little-endian):
//   magic "LCCKPTv1"
//   u32 spec length | spec as key=value lines
//   u32 parameter count
//   per parameter: u32 name length | name | u32 rows | u32 cols | rows*cols f64
// Scaler statistics, when given, follow as extra blobs named "scaler.*".
struct Checkpoint {
  std::unique_ptr<Model> model;
  std::optional<Scaler> scaler;
};
void save_checkpoint(const std::filesystem::path& path, const Model& model, const Scaler* scaler = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string serialize_spec(const ModelSpec& spec);
ModelSpec parse_spec(const std::string& text);

}  // namespace loadcast
