#include "eegx/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "eegx/util.hpp"

namespace eegx {

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_string(ss.str());
}

RunConfig RunConfig::from_string(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::runtime_error("config: malformed section at line " +
                                 std::to_string(lineno));
      section = lower(trim(t.substr(1, t.size() - 2)));
      cfg.sections_[section];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: expected key = value at line " +
                               std::to_string(lineno));
    const std::string key = lower(trim(t.substr(0, eq)));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config: empty key at line " +
                               std::to_string(lineno));
    cfg.sections_[section][key] = value;
  }
  return cfg;
}

bool RunConfig::has(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(lower(section));
  return s != sections_.end() && s->second.count(lower(key)) > 0;
}

std::string RunConfig::get_str(const std::string& section,
                               const std::string& key,
                               const std::string& fallback) const {
  const auto s = sections_.find(lower(section));
  if (s == sections_.end()) return fallback;
  const auto it = s->second.find(lower(key));
  return it == s->second.end() ? fallback : it->second;
}

long RunConfig::get_int(const std::string& section, const std::string& key,
                        long fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get_str(section, key, "");
  try {
    std::size_t pos = 0;
    const long out = std::stol(v, &pos, 0);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw std::runtime_error("config: [" + section + "] " + key +
                             " must be an integer, got '" + v + "'");
  }
}

real RunConfig::get_real(const std::string& section, const std::string& key,
                         real fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get_str(section, key, "");
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return static_cast<real>(out);
  } catch (const std::exception&) {
    throw std::runtime_error("config: [" + section + "] " + key +
                             " must be a number, got '" + v + "'");
  }
}

bool RunConfig::get_bool(const std::string& section, const std::string& key,
                         bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = lower(get_str(section, key, ""));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::runtime_error("config: [" + section + "] " + key +
                           " must be a boolean, got '" + v + "'");
}

RunSpec parse_run_spec(const RunConfig& cfg) {
  static const std::map<std::string, std::set<std::string>> known = {
      {"data", {"dataset", "atlas"}},
      {"model",
       {"d_e", "heads", "student_layers", "predictor_layers", "decoder_layers",
        "ffn_mult", "dropout", "window", "overlap", "channel_embedding",
        "ce_vocabulary"}},
      {"train",
       {"batch_size", "epochs", "lr", "lr_final", "ema_start", "ema_end",
        "val_fraction", "patience", "seed", "precision"}},
      {"mask", {"ratio", "block_len"}},
      {"loss", {"w_rec", "w_align", "w_reg", "use_dict"}},
      {"dict", {"groups", "kernels", "kernel_length"}},
      {"denoise",
       {"kind", "band_low_hz", "band_high_hz", "notch_hz", "notch_q", "order"}},
      {"out", {"dir"}},
  };
  for (const auto& [section, keys] : cfg.sections()) {
    const auto it = known.find(section);
    if (it == known.end())
      throw std::runtime_error("config: unknown section [" + section + "]");
    for (const auto& [key, value] : keys)
      if (!it->second.count(key))
        throw std::runtime_error("config: unknown key '" + key +
                                 "' in section [" + section + "]");
  }

  RunSpec spec;
  spec.dataset_dir = cfg.get_str("data", "dataset", "");
  spec.atlas_path = cfg.get_str("data", "atlas", "");
  spec.out_dir = cfg.get_str("out", "dir", spec.out_dir);

  auto& m = spec.model;
  m.d_e = static_cast<int>(cfg.get_int("model", "d_e", m.d_e));
  m.heads = static_cast<int>(cfg.get_int("model", "heads", m.heads));
  m.student_layers =
      static_cast<int>(cfg.get_int("model", "student_layers", m.student_layers));
  m.predictor_layers = static_cast<int>(
      cfg.get_int("model", "predictor_layers", m.predictor_layers));
  m.decoder_layers =
      static_cast<int>(cfg.get_int("model", "decoder_layers", m.decoder_layers));
  m.ffn_mult = static_cast<int>(cfg.get_int("model", "ffn_mult", m.ffn_mult));
  m.dropout = cfg.get_real("model", "dropout", m.dropout);
  m.window = static_cast<int>(cfg.get_int("model", "window", m.window));
  m.overlap = static_cast<int>(cfg.get_int("model", "overlap", m.overlap));
  m.ce = channel_embedding_kind_from_string(
      cfg.get_str("model", "channel_embedding", to_string(m.ce)));
  {
    std::string vocab = cfg.get_str("model", "ce_vocabulary", "");
    if (!vocab.empty()) {
      std::stringstream ss(vocab);
      std::string name;
      while (std::getline(ss, name, ',')) {
        name = trim(name);
        if (!name.empty()) m.learned_ce_names.push_back(name);
      }
    }
  }

  auto& t = spec.train;
  t.batch_size = static_cast<int>(cfg.get_int("train", "batch_size", t.batch_size));
  t.epochs = static_cast<int>(cfg.get_int("train", "epochs", t.epochs));
  t.lr = cfg.get_real("train", "lr", t.lr);
  t.lr_final = cfg.get_real("train", "lr_final", t.lr_final);
  t.ema_start = cfg.get_real("train", "ema_start", t.ema_start);
  t.ema_end = cfg.get_real("train", "ema_end", t.ema_end);
  t.val_fraction = cfg.get_real("train", "val_fraction", t.val_fraction);
  t.patience = static_cast<int>(cfg.get_int("train", "patience", t.patience));
  t.seed = static_cast<std::uint64_t>(cfg.get_int("train", "seed", 0));
  {
    const std::string precision = lower(cfg.get_str("train", "precision", "f64"));
    const std::string built = sizeof(real) == 8 ? "f64" : "f32";
    if (precision != built)
      throw std::runtime_error("config: precision '" + precision +
                               "' does not match this build (" + built +
                               "); rebuild with EEGX_REAL_FLOAT for f32");
  }
  t.mask.ratio = cfg.get_real("mask", "ratio", t.mask.ratio);
  t.mask.block_len =
      static_cast<int>(cfg.get_int("mask", "block_len", t.mask.block_len));
  t.weights.rec = cfg.get_real("loss", "w_rec", t.weights.rec);
  t.weights.align = cfg.get_real("loss", "w_align", t.weights.align);
  t.weights.reg = cfg.get_real("loss", "w_reg", t.weights.reg);
  t.use_dict = cfg.get_bool("loss", "use_dict", t.use_dict);
  t.dict_groups = static_cast<int>(cfg.get_int("dict", "groups", t.dict_groups));
  t.dict_kernels =
      static_cast<int>(cfg.get_int("dict", "kernels", t.dict_kernels));
  t.dict_kernel_length = static_cast<int>(
      cfg.get_int("dict", "kernel_length", t.dict_kernel_length));
  t.denoiser.kind =
      denoiser_kind_from_string(cfg.get_str("denoise", "kind", to_string(t.denoiser.kind)));
  t.denoiser.band_low_hz =
      cfg.get_real("denoise", "band_low_hz", t.denoiser.band_low_hz);
  t.denoiser.band_high_hz =
      cfg.get_real("denoise", "band_high_hz", t.denoiser.band_high_hz);
  t.denoiser.notch_hz = cfg.get_real("denoise", "notch_hz", t.denoiser.notch_hz);
  t.denoiser.notch_q = cfg.get_real("denoise", "notch_q", t.denoiser.notch_q);
  t.denoiser.filter_order =
      static_cast<int>(cfg.get_int("denoise", "order", t.denoiser.filter_order));
  return spec;
}

std::string run_spec_to_text(const RunSpec& spec) {
  std::ostringstream os;
  os << "[data]\n";
  os << "dataset = " << spec.dataset_dir << "\n";
  if (!spec.atlas_path.empty()) os << "atlas = " << spec.atlas_path << "\n";
  os << "\n[model]\n";
  const auto& m = spec.model;
  os << "d_e = " << m.d_e << "\nheads = " << m.heads
     << "\nstudent_layers = " << m.student_layers
     << "\npredictor_layers = " << m.predictor_layers
     << "\ndecoder_layers = " << m.decoder_layers << "\nffn_mult = " << m.ffn_mult
     << "\ndropout = " << m.dropout << "\nwindow = " << m.window
     << "\noverlap = " << m.overlap
     << "\nchannel_embedding = " << to_string(m.ce) << "\n";
  if (!m.learned_ce_names.empty()) {
    os << "ce_vocabulary = ";
    for (std::size_t i = 0; i < m.learned_ce_names.size(); ++i)
      os << (i ? "," : "") << m.learned_ce_names[i];
    os << "\n";
  }
  const auto& t = spec.train;
  os << "\n[train]\n";
  os << "batch_size = " << t.batch_size << "\nepochs = " << t.epochs
     << "\nlr = " << t.lr << "\nlr_final = " << t.lr_final
     << "\nema_start = " << t.ema_start << "\nema_end = " << t.ema_end
     << "\nval_fraction = " << t.val_fraction << "\npatience = " << t.patience
     << "\nseed = " << t.seed << "\n";
  os << "\n[mask]\nratio = " << t.mask.ratio
     << "\nblock_len = " << t.mask.block_len << "\n";
  os << "\n[loss]\nw_rec = " << t.weights.rec << "\nw_align = " << t.weights.align
     << "\nw_reg = " << t.weights.reg
     << "\nuse_dict = " << (t.use_dict ? "true" : "false") << "\n";
  os << "\n[dict]\ngroups = " << t.dict_groups << "\nkernels = " << t.dict_kernels
     << "\nkernel_length = " << t.dict_kernel_length << "\n";
  os << "\n[denoise]\nkind = " << to_string(t.denoiser.kind)
     << "\nband_low_hz = " << t.denoiser.band_low_hz
     << "\nband_high_hz = " << t.denoiser.band_high_hz
     << "\nnotch_hz = " << t.denoiser.notch_hz
     << "\nnotch_q = " << t.denoiser.notch_q
     << "\norder = " << t.denoiser.filter_order << "\n";
  os << "\n[out]\ndir = " << spec.out_dir << "\n";
  return os.str();
}

}  // namespace eegx
