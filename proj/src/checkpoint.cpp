#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "loadcast/error.hpp"
#include "loadcast/model.hpp"

namespace loadcast {

namespace {

constexpr char kMagic[8] = {'L', 'C', 'C', 'K', 'P', 'T', 'v', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error(ErrorCode::BadFormat, "truncated checkpoint");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) throw Error(ErrorCode::BadFormat, "truncated checkpoint");
  return s;
}

void put_blob(std::ostream& out, const std::string& name, const Matrix& m) {
  put_string(out, name);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix row_of(const std::vector<double>& v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

std::vector<double> to_vec(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(std::stoi(tok));
  return out;
}

}  // namespace

std::string serialize_spec(const ModelSpec& s) {
  std::ostringstream out;
  out.precision(17);
  out << "variant=" << to_string(s.variant) << '\n'
      << "lstm_units=" << join(s.lstm_units) << '\n'
      << "dropout=" << s.dropout << '\n'
      << "dense_units=" << join(s.dense_units) << '\n'
      << "optimizer=" << to_string(s.optimizer) << '\n'
      << "learning_rate=" << s.learning_rate << '\n'
      << "horizontal_features=" << s.horizontal_features << '\n'
      << "vertical_features=" << s.vertical_features << '\n'
      << "horizontal_steps=" << s.horizontal_steps << '\n'
      << "vertical_steps=" << s.vertical_steps << '\n';
  return out.str();
}

ModelSpec parse_spec(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const std::string& k) -> const std::string& {
    const auto it = kv.find(k);
    if (it == kv.end()) throw Error(ErrorCode::BadFormat, "checkpoint spec lacks " + k);
    return it->second;
  };
  ModelSpec s;
  try {
    s.variant = variant_from_name(need("variant"));
    s.lstm_units = split_ints(need("lstm_units"));
    s.dropout = std::stod(need("dropout"));
    s.dense_units = split_ints(need("dense_units"));
    s.optimizer = optimizer_from_name(need("optimizer"));
    s.learning_rate = std::stod(need("learning_rate"));
    s.horizontal_features = std::stoi(need("horizontal_features"));
    s.vertical_features = std::stoi(need("vertical_features"));
    s.horizontal_steps = std::stoi(need("horizontal_steps"));
    s.vertical_steps = std::stoi(need("vertical_steps"));
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::BadFormat, "malformed checkpoint spec");
  }
  validate(s);
  return s;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const Scaler* scaler) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MissingInput, "cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_string(out, serialize_spec(model.spec()));
  const auto params = model.parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size() + (scaler ? 5 : 0)));
  for (const auto* p : params) put_blob(out, p->name, p->value);
  if (scaler) {
    put_blob(out, "scaler.horizontal.mean", row_of(scaler->horizontal.mean));
    put_blob(out, "scaler.horizontal.std", row_of(scaler->horizontal.std));
    put_blob(out, "scaler.vertical.mean", row_of(scaler->vertical.mean));
    put_blob(out, "scaler.vertical.std", row_of(scaler->vertical.std));
    put_blob(out, "scaler.target", row_of({scaler->target_mean, scaler->target_std}));
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw Error(ErrorCode::BadFormat, path.string() + " is not a checkpoint");
  Checkpoint ck;
  ck.model = std::make_unique<Model>(parse_spec(get_string(in)));
  std::map<std::string, Parameter*> by_name;
  for (auto* p : ck.model->parameters()) by_name[p->name] = p;
  const auto count = get<std::uint32_t>(in);
  std::map<std::string, Matrix> extra;
  std::size_t loaded = 0;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto name = get_string(in);
    const auto rows = get<std::uint32_t>(in);
    const auto cols = get<std::uint32_t>(in);
    Matrix m(rows, cols);
    if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double))))
      throw Error(ErrorCode::BadFormat, "truncated checkpoint");
    const auto it = by_name.find(name);
    if (it != by_name.end()) {
      if (it->second->value.rows() != m.rows() || it->second->value.cols() != m.cols())
        throw Error(ErrorCode::ShapeMismatch, "checkpoint blob " + name + " has the wrong shape");
      it->second->value = m;
      ++loaded;
    } else if (name.starts_with("scaler.")) {
      extra[name] = m;
    } else {
      throw Error(ErrorCode::BadFormat, "unexpected checkpoint blob " + name);
    }
  }
  if (loaded != by_name.size()) throw Error(ErrorCode::BadFormat, "checkpoint is missing parameters");
  if (extra.size() == 5) {
    Scaler s;
    s.horizontal.mean = to_vec(extra["scaler.horizontal.mean"]);
    s.horizontal.std = to_vec(extra["scaler.horizontal.std"]);
    s.vertical.mean = to_vec(extra["scaler.vertical.mean"]);
    s.vertical.std = to_vec(extra["scaler.vertical.std"]);
    const auto t = to_vec(extra["scaler.target"]);
    s.target_mean = t.at(0);
    s.target_std = t.at(1);
    ck.scaler = s;
  }
  return ck;
}

}  // namespace loadcast
