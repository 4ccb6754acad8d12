#include "eegx/signal_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "eegx/util.hpp"

namespace eegx {

void RawRecording::validate() const {
  if (channel_names.empty())
    throw std::runtime_error("recording: no channels");
  if (length < 1) throw std::runtime_error("recording: empty signal");
  if (samples.size() !=
      static_cast<std::size_t>(channels()) * static_cast<std::size_t>(length))
    throw std::runtime_error("recording: sample buffer size mismatch");
  if (!(sample_rate > real(0)))
    throw std::runtime_error("recording: sample rate must be positive");
}

namespace {

constexpr std::uint32_t kMagic = 0x31475345u;  // "ESG1"
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f, const std::string& path) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw std::runtime_error("signal: truncated file " + path);
  return v;
}

}  // namespace

void write_signal(const std::string& path, const RawRecording& rec) {
  rec.validate();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("signal: cannot write " + path);
  put(f, kMagic);
  put(f, kVersion);
  put(f, static_cast<std::uint32_t>(rec.channels()));
  put(f, static_cast<std::uint64_t>(rec.length));
  put(f, static_cast<double>(rec.sample_rate));
  for (const auto& name : rec.channel_names) {
    put(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  for (real v : rec.samples) put(f, static_cast<float>(v));
  if (!f) throw std::runtime_error("signal: write failed for " + path);
}

RawRecording read_signal(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("signal: cannot open " + path);
  const auto magic = get<std::uint32_t>(f, path);
  if (magic != kMagic)
    throw std::runtime_error("signal: bad magic in " + path);
  const auto version = get<std::uint32_t>(f, path);
  if (version != kVersion)
    throw std::runtime_error("signal: unsupported version " +
                             std::to_string(version) + " in " + path);
  const auto C = get<std::uint32_t>(f, path);
  const auto L = get<std::uint64_t>(f, path);
  const auto rate = get<double>(f, path);
  if (C == 0 || L == 0)
    throw std::runtime_error("signal: empty dimensions in " + path);
  RawRecording rec;
  rec.length = static_cast<long>(L);
  rec.sample_rate = static_cast<real>(rate);
  for (std::uint32_t c = 0; c < C; ++c) {
    const auto len = get<std::uint32_t>(f, path);
    std::string name(len, '\0');
    f.read(name.data(), len);
    if (!f) throw std::runtime_error("signal: truncated file " + path);
    rec.channel_names.push_back(std::move(name));
  }
  rec.samples.resize(static_cast<std::size_t>(C) * L);
  for (auto& v : rec.samples) v = static_cast<real>(get<float>(f, path));
  rec.validate();
  return rec;
}

void write_signal_csv(const std::string& path, const RawRecording& rec) {
  rec.validate();
  std::ofstream f(path);
  if (!f) throw std::runtime_error("signal: cannot write " + path);
  for (int c = 0; c < rec.channels(); ++c)
    f << (c ? "," : "") << rec.channel_names[static_cast<std::size_t>(c)];
  f << "\n";
  f.precision(9);
  for (long t = 0; t < rec.length; ++t) {
    for (int c = 0; c < rec.channels(); ++c)
      f << (c ? "," : "") << rec.channel(c)[t];
    f << "\n";
  }
}

RawRecording read_signal_csv(const std::string& path, real sample_rate) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("signal: cannot open " + path);
  std::string line;
  if (!std::getline(f, line))
    throw std::runtime_error("signal: empty CSV " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  RawRecording rec;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) rec.channel_names.push_back(trim(col));
  }
  const std::size_t C = rec.channel_names.size();
  std::vector<std::vector<real>> cols(C);
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string col;
    std::size_t c = 0;
    while (std::getline(ss, col, ',')) {
      if (c >= C)
        throw std::runtime_error("signal: too many columns at line " +
                                 std::to_string(lineno) + " of " + path);
      try {
        cols[c].push_back(static_cast<real>(std::stod(col)));
      } catch (const std::exception&) {
        throw std::runtime_error("signal: bad value '" + col + "' at line " +
                                 std::to_string(lineno) + " of " + path);
      }
      ++c;
    }
    if (c != C)
      throw std::runtime_error("signal: expected " + std::to_string(C) +
                               " columns at line " + std::to_string(lineno) +
                               " of " + path);
  }
  if (cols.empty() || cols[0].empty())
    throw std::runtime_error("signal: no samples in " + path);
  rec.length = static_cast<long>(cols[0].size());
  rec.sample_rate = sample_rate;
  rec.samples.reserve(C * cols[0].size());
  for (const auto& col : cols)
    rec.samples.insert(rec.samples.end(), col.begin(), col.end());
  rec.validate();
  return rec;
}

}  // namespace eegx
