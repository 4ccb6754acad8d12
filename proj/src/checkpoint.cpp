#include "eegx/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace eegx {

namespace {

constexpr std::uint64_t kMagic = 0x54504b4358474545ull;  // "EEGXCKPT"
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_str(std::ofstream& f, const std::string& s) {
  put(f, static_cast<std::uint32_t>(s.size()));
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::ifstream& f, const std::string& path) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw std::runtime_error("checkpoint: truncated file " + path);
  return v;
}

std::string get_str(std::ifstream& f, const std::string& path) {
  const auto len = get<std::uint32_t>(f, path);
  std::string s(len, '\0');
  f.read(s.data(), len);
  if (!f) throw std::runtime_error("checkpoint: truncated file " + path);
  return s;
}

void put_tensor(std::ofstream& f, const std::string& name, const Tensor& t) {
  put_str(f, name);
  put(f, static_cast<std::uint32_t>(t.ndim()));
  for (int i = 0; i < t.ndim(); ++i) put(f, static_cast<std::int32_t>(t.dim(i)));
  for (real v : t.data()) put(f, static_cast<double>(v));
}

std::pair<std::string, Tensor> get_tensor(std::ifstream& f,
                                          const std::string& path) {
  const std::string name = get_str(f, path);
  const auto ndim = get<std::uint32_t>(f, path);
  Shape shape;
  for (std::uint32_t i = 0; i < ndim; ++i)
    shape.push_back(get<std::int32_t>(f, path));
  std::vector<real> data(shape_numel(shape));
  for (auto& v : data) v = static_cast<real>(get<double>(f, path));
  return {name, Tensor::constant(std::move(shape), std::move(data))};
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelState& state) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
  put(f, kMagic);
  put(f, kVersion);
  const auto& c = state.config;
  put(f, static_cast<std::int32_t>(c.d_e));
  put(f, static_cast<std::int32_t>(c.heads));
  put(f, static_cast<std::int32_t>(c.student_layers));
  put(f, static_cast<std::int32_t>(c.predictor_layers));
  put(f, static_cast<std::int32_t>(c.decoder_layers));
  put(f, static_cast<std::int32_t>(c.ffn_mult));
  put(f, static_cast<double>(c.dropout));
  put(f, static_cast<std::int32_t>(c.window));
  put(f, static_cast<std::int32_t>(c.overlap));
  put(f, static_cast<std::int32_t>(static_cast<int>(c.ce)));
  put(f, static_cast<std::uint32_t>(c.learned_ce_names.size()));
  for (const auto& n : c.learned_ce_names) put_str(f, n);
  put(f, static_cast<std::uint64_t>(state.step));
  put(f, static_cast<std::uint32_t>(state.params.size() + state.teacher.size()));
  for (const auto& [name, t] : state.params) put_tensor(f, name, t);
  for (const auto& [name, t] : state.teacher)
    put_tensor(f, "teacher." + name, t);
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  if (get<std::uint64_t>(f, path) != kMagic)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const auto version = get<std::uint32_t>(f, path);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version));
  ModelConfig c;
  c.d_e = get<std::int32_t>(f, path);
  c.heads = get<std::int32_t>(f, path);
  c.student_layers = get<std::int32_t>(f, path);
  c.predictor_layers = get<std::int32_t>(f, path);
  c.decoder_layers = get<std::int32_t>(f, path);
  c.ffn_mult = get<std::int32_t>(f, path);
  c.dropout = static_cast<real>(get<double>(f, path));
  c.window = get<std::int32_t>(f, path);
  c.overlap = get<std::int32_t>(f, path);
  c.ce = static_cast<ChannelEmbeddingKind>(get<std::int32_t>(f, path));
  const auto n_names = get<std::uint32_t>(f, path);
  for (std::uint32_t i = 0; i < n_names; ++i)
    c.learned_ce_names.push_back(get_str(f, path));

  ModelState st;
  st.config = c;
  st.step = static_cast<long>(get<std::uint64_t>(f, path));
  const auto n_params = get<std::uint32_t>(f, path);
  for (std::uint32_t i = 0; i < n_params; ++i) {
    auto [name, t] = get_tensor(f, path);
    if (name.rfind("teacher.", 0) == 0)
      st.teacher[name.substr(8)] = std::move(t);
    else
      st.params[name] = Tensor::leaf(t.shape(), t.data());
  }
  if (st.params.empty())
    throw std::runtime_error("checkpoint: no parameters in " + path);
  return st;
}

}  // namespace eegx
