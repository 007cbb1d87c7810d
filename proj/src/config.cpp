#include "ffsv/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ffsv/error.hpp"

namespace ffsv {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& v, int lineno) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError("config line " + std::to_string(lineno) +
                    ": expected boolean, got '" + v + "'");
}

double parse_double(const std::string& v, int lineno) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config line " + std::to_string(lineno) +
                      ": expected number, got '" + v + "'");
  }
}

int parse_int(const std::string& v, int lineno) {
  try {
    std::size_t used = 0;
    int i = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config line " + std::to_string(lineno) +
                      ": expected integer, got '" + v + "'");
  }
}

std::vector<BlockSpec> parse_blocks(const std::string& v, int lineno) {
  // "mid:out:stride_t:stride_f:bam" entries separated by commas
  std::vector<BlockSpec> blocks;
  std::istringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream fs(trim(item));
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(fs, field, ':')) fields.push_back(field);
    if (fields.size() != 5)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": block spec needs mid:out:st:sf:{bam|plain}");
    BlockSpec b;
    b.mid = parse_int(fields[0], lineno);
    b.out = parse_int(fields[1], lineno);
    b.stride_t = parse_int(fields[2], lineno);
    b.stride_f = parse_int(fields[3], lineno);
    if (fields[4] == "bam")
      b.bam = true;
    else if (fields[4] == "plain")
      b.bam = false;
    else
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": block kind must be 'bam' or 'plain'");
    blocks.push_back(b);
  }
  if (blocks.empty())
    throw ConfigError("config line " + std::to_string(lineno) + ": empty block list");
  return blocks;
}

std::vector<double> parse_double_list(const std::string& v, int lineno) {
  std::vector<double> out;
  std::istringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item), lineno));
  if (out.empty())
    throw ConfigError("config line " + std::to_string(lineno) + ": empty list");
  return out;
}

}  // namespace

void apply_config_line(PipelineConfig& cfg, const std::string& raw, int lineno) {
  const std::string line = trim(raw);
  if (line.empty() || line[0] == '#') return;
  const auto eq = line.find('=');
  if (eq == std::string::npos)
    throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
  const std::string key = trim(line.substr(0, eq));
  const std::string value = trim(line.substr(eq + 1));
  if (key.empty() || value.empty())
    throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");

  using Setter = std::function<void(const std::string&, int)>;
  const std::map<std::string, Setter> setters = {
      {"paths.checkpoint", [&](const std::string& v, int) { cfg.checkpoint = v; }},
      {"paths.trials", [&](const std::string& v, int) { cfg.trials = v; }},
      {"paths.wav_map", [&](const std::string& v, int) { cfg.wav_map = v; }},
      {"paths.manifest", [&](const std::string& v, int) { cfg.manifest = v; }},
      {"paths.out_dir", [&](const std::string& v, int) { cfg.out_dir = v; }},
      {"stages.wpe", [&](const std::string& v, int l) { cfg.wpe_enabled = parse_bool(v, l); }},
      {"stages.beamformer",
       [&](const std::string& v, int l) { cfg.beamformer_enabled = parse_bool(v, l); }},
      {"stages.selection",
       [&](const std::string& v, int l) { cfg.selection_enabled = parse_bool(v, l); }},
      {"stages.dat", [&](const std::string& v, int l) { cfg.dat_enabled = parse_bool(v, l); }},
      {"stft.window_length",
       [&](const std::string& v, int l) { cfg.stft.window_length = parse_int(v, l); }},
      {"stft.hop_length",
       [&](const std::string& v, int l) { cfg.stft.hop_length = parse_int(v, l); }},
      {"stft.fft_size",
       [&](const std::string& v, int l) { cfg.stft.fft_size = parse_int(v, l); }},
      {"stft.window",
       [&](const std::string& v, int l) {
         if (v == "hann")
           cfg.stft.window = WindowType::hann;
         else if (v == "hamming")
           cfg.stft.window = WindowType::hamming;
         else
           throw ConfigError("config line " + std::to_string(l) +
                             ": window must be hann or hamming");
       }},
      {"wpe.taps", [&](const std::string& v, int l) { cfg.wpe.taps = parse_int(v, l); }},
      {"wpe.delay", [&](const std::string& v, int l) { cfg.wpe.delay = parse_int(v, l); }},
      {"wpe.iterations",
       [&](const std::string& v, int l) { cfg.wpe.iterations = parse_int(v, l); }},
      {"wpe.variance_floor",
       [&](const std::string& v, int l) { cfg.wpe.variance_floor = parse_double(v, l); }},
      {"cgmm.iterations",
       [&](const std::string& v, int l) { cfg.cgmm.iterations = parse_int(v, l); }},
      {"cgmm.reg_scale",
       [&](const std::string& v, int l) { cfg.cgmm.reg_scale = parse_double(v, l); }},
      {"cgmm.init",
       [&](const std::string& v, int l) {
         if (v == "power")
           cfg.cgmm.init = CgmmConfig::Init::power_split;
         else if (v == "random")
           cfg.cgmm.init = CgmmConfig::Init::random_responsibility;
         else
           throw ConfigError("config line " + std::to_string(l) +
                             ": cgmm.init must be power or random");
       }},
      {"net.input_frames",
       [&](const std::string& v, int l) { cfg.net.input_frames = parse_int(v, l); }},
      {"net.input_coeffs",
       [&](const std::string& v, int l) { cfg.net.input_coeffs = parse_int(v, l); }},
      {"net.stem_channels",
       [&](const std::string& v, int l) { cfg.net.stem_channels = parse_int(v, l); }},
      {"net.stem_stride_t",
       [&](const std::string& v, int l) { cfg.net.stem_stride_t = parse_int(v, l); }},
      {"net.stem_stride_f",
       [&](const std::string& v, int l) { cfg.net.stem_stride_f = parse_int(v, l); }},
      {"net.blocks",
       [&](const std::string& v, int l) { cfg.net.blocks = parse_blocks(v, l); }},
      {"net.reduction",
       [&](const std::string& v, int l) { cfg.net.reduction = parse_int(v, l); }},
      {"net.embedding_dim",
       [&](const std::string& v, int l) { cfg.net.embedding_dim = parse_int(v, l); }},
      {"net.domain_hidden",
       [&](const std::string& v, int l) { cfg.net.domain_hidden = parse_int(v, l); }},
      {"train.batch_size",
       [&](const std::string& v, int l) { cfg.train.batch_size = parse_int(v, l); }},
      {"train.learning_rate",
       [&](const std::string& v, int l) { cfg.train.learning_rate = parse_double(v, l); }},
      {"train.lr_decay",
       [&](const std::string& v, int l) { cfg.train.lr_decay = parse_double(v, l); }},
      {"train.decay_every",
       [&](const std::string& v, int l) { cfg.train.decay_every = parse_int(v, l); }},
      {"train.epochs",
       [&](const std::string& v, int l) { cfg.train.epochs = parse_int(v, l); }},
      {"train.dat_epochs",
       [&](const std::string& v, int l) { cfg.dat_epochs = parse_int(v, l); }},
      {"train.dat_lambda",
       [&](const std::string& v, int l) { cfg.train.dat_lambda = parse_double(v, l); }},
      {"train.dat_learning_rate",
       [&](const std::string& v, int l) { cfg.dat_learning_rate = parse_double(v, l); }},
      {"train.crop_frames",
       [&](const std::string& v, int l) { cfg.train.crop_frames = parse_int(v, l); }},
      {"selection.theta",
       [&](const std::string& v, int l) { cfg.selection.theta = parse_double(v, l); }},
      {"dcf.p_target",
       [&](const std::string& v, int l) { cfg.dcf.p_target = parse_double(v, l); }},
      {"dcf.c_miss",
       [&](const std::string& v, int l) { cfg.dcf.c_miss = parse_double(v, l); }},
      {"dcf.c_fa", [&](const std::string& v, int l) { cfg.dcf.c_fa = parse_double(v, l); }},
      {"vad.offset",
       [&](const std::string& v, int l) { cfg.vad.offset = parse_double(v, l); }},
      {"room.lx_min", [&](const std::string& v, int l) { cfg.room.lx_min = parse_double(v, l); }},
      {"room.lx_max", [&](const std::string& v, int l) { cfg.room.lx_max = parse_double(v, l); }},
      {"room.ly_min", [&](const std::string& v, int l) { cfg.room.ly_min = parse_double(v, l); }},
      {"room.ly_max", [&](const std::string& v, int l) { cfg.room.ly_max = parse_double(v, l); }},
      {"room.lz_min", [&](const std::string& v, int l) { cfg.room.lz_min = parse_double(v, l); }},
      {"room.lz_max", [&](const std::string& v, int l) { cfg.room.lz_max = parse_double(v, l); }},
      {"room.reflection_min",
       [&](const std::string& v, int l) { cfg.room.reflection_min = parse_double(v, l); }},
      {"room.reflection_max",
       [&](const std::string& v, int l) { cfg.room.reflection_max = parse_double(v, l); }},
      {"room.distance_min",
       [&](const std::string& v, int l) { cfg.room.distance_min = parse_double(v, l); }},
      {"room.distance_max",
       [&](const std::string& v, int l) { cfg.room.distance_max = parse_double(v, l); }},
      {"room.mic_radius",
       [&](const std::string& v, int l) { cfg.room.mic_radius = parse_double(v, l); }},
      {"room.num_mics",
       [&](const std::string& v, int l) { cfg.room.num_mics = parse_int(v, l); }},
      {"room.sample_rate",
       [&](const std::string& v, int l) { cfg.room.sample_rate = parse_int(v, l); }},
      {"room.max_order",
       [&](const std::string& v, int l) { cfg.room.max_order = parse_int(v, l); }},
      {"simulate.rooms",
       [&](const std::string& v, int l) { cfg.simulate_rooms = parse_int(v, l); }},
      {"simulate.rirs_per_room",
       [&](const std::string& v, int l) { cfg.rirs_per_room = parse_int(v, l); }},
      {"ablate.speakers",
       [&](const std::string& v, int l) { cfg.ablate.speakers = parse_int(v, l); }},
      {"ablate.train_utts",
       [&](const std::string& v, int l) { cfg.ablate.train_utts = parse_int(v, l); }},
      {"ablate.enroll_utts",
       [&](const std::string& v, int l) { cfg.ablate.enroll_utts = parse_int(v, l); }},
      {"ablate.test_utts",
       [&](const std::string& v, int l) { cfg.ablate.test_utts = parse_int(v, l); }},
      {"ablate.utt_seconds",
       [&](const std::string& v, int l) { cfg.ablate.utt_seconds = parse_double(v, l); }},
      {"ablate.snr_db",
       [&](const std::string& v, int l) { cfg.ablate.snr_db = parse_double(v, l); }},
      {"ablate.train_snr_db",
       [&](const std::string& v, int l) { cfg.ablate.train_snr_db = parse_double(v, l); }},
      {"ablate.sample_rate",
       [&](const std::string& v, int l) { cfg.ablate.sample_rate = parse_int(v, l); }},
      {"tune.thetas",
       [&](const std::string& v, int l) { cfg.tune.thetas = parse_double_list(v, l); }},
      {"tune.rir_candidates",
       [&](const std::string& v, int l) { cfg.tune.rir_candidates = parse_int(v, l); }},
      {"tune.speakers",
       [&](const std::string& v, int l) { cfg.tune.speakers = parse_int(v, l); }},
      {"tune.pairs_per_speaker",
       [&](const std::string& v, int l) { cfg.tune.pairs_per_speaker = parse_int(v, l); }},
      {"seed",
       [&](const std::string& v, int l) {
         cfg.seed = static_cast<std::uint64_t>(parse_int(v, l));
       }},
      {"workers",
       [&](const std::string& v, int l) { cfg.workers = parse_int(v, l); }},
  };

  auto it = setters.find(key);
  if (it == setters.end())
    throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" +
                      key + "'");
  it->second(value, lineno);
}

PipelineConfig load_config(const std::string& path) {
  PipelineConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) apply_config_line(cfg, line, ++lineno);
  return cfg;
}

}  // namespace ffsv
