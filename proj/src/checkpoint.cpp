#include "hlsf/checkpoint.hpp"

#include <fstream>

#include "hlsf/config.hpp"

namespace hlsf {

namespace {

constexpr char kCkptMagic[8] = {'H', 'L', 'S', 'F', 'C', 'K', 'P', '1'};
constexpr char kStateMagic[8] = {'H', 'L', 'S', 'F', 'S', 'T', 'A', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto n = read_pod<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

void write_matrix(std::ostream& out, const ad::Mat<float>& m) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(m.size())));
}

ad::Mat<float> read_matrix(std::istream& in) {
  const auto rows = read_pod<std::uint32_t>(in);
  const auto cols = read_pod<std::uint32_t>(in);
  ad::Mat<float> m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(m.size())));
  if (!in) throw std::runtime_error("checkpoint: truncated payload");
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kCkptMagic, sizeof(kCkptMagic));
  write_pod<std::uint32_t>(out, ckpt.version);
  write_pod<std::uint64_t>(out, ckpt.seed);
  write_pod<std::uint64_t>(out, ckpt.step);

  std::string config_text;
  for (const auto& [k, v] : model_config_to_kv(ckpt.config)) config_text += k + "=" + v + "\n";
  write_string(out, config_text);

  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.count()));
  for (const auto& item : ckpt.params.items()) {
    write_string(out, item.name);
    write_matrix(out, item.value);
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);

  Checkpoint ckpt;
  ckpt.version = read_pod<std::uint32_t>(in);
  if (ckpt.version != 1) throw std::runtime_error("unsupported checkpoint version");
  ckpt.seed = read_pod<std::uint64_t>(in);
  ckpt.step = read_pod<std::uint64_t>(in);
  ckpt.config = model_config_from_kv(parse_kv_text(read_string(in)));

  // Registering from the config reproduces the canonical manifest; the
  // file must then match it name for name.
  register_model_params(ckpt.params, ckpt.config);
  const auto count = read_pod<std::uint32_t>(in);
  if (count != ckpt.params.count())
    throw std::runtime_error("checkpoint parameter count mismatch");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = read_string(in);
    ad::Mat<float> value = read_matrix(in);
    if (!ckpt.params.has(name)) throw std::runtime_error("unknown checkpoint parameter: " + name);
    ad::Mat<float>& slot = ckpt.params.at(name);
    if (slot.rows() != value.rows() || slot.cols() != value.cols())
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    slot = std::move(value);
  }
  return ckpt;
}

void save_train_state(const std::string& path, const TrainStateBlob& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kStateMagic, sizeof(kStateMagic));
  write_pod<std::uint64_t>(out, state.step);
  write_pod<std::uint32_t>(out, state.epoch);
  write_pod<double>(out, state.best_val);
  write_pod<std::uint64_t>(out, state.rng_state);
  write_pod<std::uint64_t>(out, state.adam_t_model);
  write_pod<std::uint64_t>(out, state.adam_t_disc);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(state.moment_m.size()));
  for (std::size_t i = 0; i < state.moment_m.size(); ++i) {
    write_matrix(out, state.moment_m[i]);
    write_matrix(out, state.moment_v[i]);
  }
  if (!out) throw std::runtime_error("train-state write failed: " + path);
}

TrainStateBlob load_train_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open train state: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kStateMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a train-state file: " + path);
  TrainStateBlob state;
  state.step = read_pod<std::uint64_t>(in);
  state.epoch = read_pod<std::uint32_t>(in);
  state.best_val = read_pod<double>(in);
  state.rng_state = read_pod<std::uint64_t>(in);
  state.adam_t_model = read_pod<std::uint64_t>(in);
  state.adam_t_disc = read_pod<std::uint64_t>(in);
  const auto n = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n; ++i) {
    state.moment_m.push_back(read_matrix(in));
    state.moment_v.push_back(read_matrix(in));
  }
  return state;
}

}  // namespace hlsf
