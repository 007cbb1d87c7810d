#include "ffsv/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ffsv/cgmm_mvdr.hpp"
#include "ffsv/checkpoint.hpp"
#include "ffsv/embedder.hpp"
#include "ffsv/error.hpp"
#include "ffsv/room_sim.hpp"
#include "ffsv/wav_io.hpp"
#include "ffsv/wpe.hpp"
#include "ffsv/fft.hpp"

namespace fs = std::filesystem;

namespace ffsv {

namespace {

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t a = 0,
                       std::uint64_t b = 0) {
  std::uint64_t x = base * 1000003ull + tag * 10007ull + a * 97ull + b + 1ull;
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdull;
  x ^= x >> 33;
  return x;
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw Error("cannot create directory: " + path);
}

std::string utt_id(const std::string& path) {
  return fs::path(path).stem().string();
}

EmbedderConfig embedder_config(const PipelineConfig& cfg) {
  EmbedderConfig e;
  e.vad = cfg.vad;
  return e;
}

MicroNetConfig net_config_for_checkpoint(const PipelineConfig& cfg,
                                         const std::string& path) {
  auto shapes = read_checkpoint_shapes(path);
  MicroNetConfig net = cfg.net;
  auto speaker = shapes.find("speaker_head.weight");
  auto domain = shapes.find("domain.fc2.weight");
  auto embed = shapes.find("embed.weight");
  if (speaker == shapes.end() || domain == shapes.end() || embed == shapes.end())
    throw Error("checkpoint: missing head tensors in " + path);
  net.num_speakers = speaker->second.at(0);
  net.num_domains = domain->second.at(0);
  net.embedding_dim = embed->second.at(0);
  return net;
}

struct LoadedNet {
  MicroNetConfig config;
  std::unique_ptr<MicroNet> net;
};

LoadedNet load_net(const PipelineConfig& cfg, const std::string& path) {
  LoadedNet loaded;
  loaded.config = net_config_for_checkpoint(cfg, path);
  loaded.net = std::make_unique<MicroNet>(loaded.config);
  load_checkpoint(*loaded.net, path);
  return loaded;
}

void copy_params(MicroNet& src, MicroNet& dst) {
  auto a = src.params();
  auto b = dst.params();
  if (a.size() != b.size()) throw Error("copy_params: param sets differ");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].value->size() != b[i].value->size())
      throw Error("copy_params: mismatched parameter " + a[i].name);
    *b[i].value = *a[i].value;
  }
}

Waveform white_noise(std::size_t samples, int channels, int sample_rate, Rng& rng) {
  Waveform w;
  w.sample_rate = sample_rate;
  w.channels.resize(static_cast<std::size_t>(channels));
  for (auto& ch : w.channels) {
    ch.resize(samples);
    for (auto& s : ch) s = 0.1 * rng.normal();
  }
  return w;
}

}  // namespace

Waveform synth_utterance(int speaker, Rng& rng, int sample_rate, double seconds) {
  // Formant-filtered noise: a speaker-specific spectral envelope driving a
  // white innovation, so dereverberation assumptions hold. Three resonances
  // plus a spectral tilt identify the speaker.
  const std::size_t len = static_cast<std::size_t>(seconds * sample_rate);
  const double nyquist = 0.5 * sample_rate;
  const double f1 = 250.0 + 110.0 * speaker;
  const double f2 = 900.0 + 260.0 * ((speaker * 3) % 7);
  const double f3 = 2200.0 + 180.0 * ((speaker * 5) % 4);
  const double tilt = 0.2 + 0.22 * (speaker % 3);

  auto envelope = [&](double f) {
    auto bump = [](double f, double center, double width) {
      const double d = (f - center) / width;
      return std::exp(-0.5 * d * d);
    };
    return std::pow(std::max(1.0 - f / nyquist, 0.05), tilt) *
           (0.08 + bump(f, f1, 70.0) + 0.9 * bump(f, f2, 110.0) +
            0.7 * bump(f, f3, 160.0));
  };

  // linear-phase FIR via frequency sampling
  const int grid = 128;
  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(grid / 2) + 1);
  for (int k = 0; k <= grid / 2; ++k)
    spectrum[static_cast<std::size_t>(k)] =
        envelope(static_cast<double>(k) * sample_rate / grid);
  auto kernel = irfft(spectrum, grid);
  const int half = 32;
  std::vector<double> fir(static_cast<std::size_t>(2 * half) + 1);
  for (int i = -half; i <= half; ++i) {
    const double w = 0.5 * (1.0 + std::cos(M_PI * i / (half + 1)));
    fir[static_cast<std::size_t>(i + half)] =
        kernel[static_cast<std::size_t>((i + grid) % grid)] * w;
  }

  std::vector<double> innovation(len + fir.size());
  for (auto& v : innovation) v = rng.normal();

  // burst on/off pattern, 120 ms segments
  const std::size_t seg = static_cast<std::size_t>(0.12 * sample_rate);
  std::vector<bool> active;
  for (std::size_t pos = 0; pos < len; pos += seg) active.push_back(rng.uniform() < 0.72);
  if (std::none_of(active.begin(), active.end(), [](bool b) { return b; }))
    active[0] = true;

  std::vector<double> x(len, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    if (!active[std::min(i / seg, active.size() - 1)]) continue;
    double acc = 0.0;
    for (std::size_t j = 0; j < fir.size(); ++j) acc += fir[j] * innovation[i + j];
    x[i] = acc;
  }
  double peak = 1e-9;
  for (double v : x) peak = std::max(peak, std::abs(v));
  for (auto& v : x) v = 0.3 * v / peak;
  for (auto& v : x) v += 0.002 * rng.normal();
  return make_mono(std::move(x), sample_rate);
}

Waveform enhance_waveform(const Waveform& w, const PipelineConfig& cfg) {
  if (!cfg.wpe_enabled && !cfg.beamformer_enabled) return to_mono(w, 0);

  ComplexSpectrogram spec = stft(w, cfg.stft);
  if (cfg.wpe_enabled) spec = wpe(spec, cfg.wpe).spectrogram;
  if (cfg.beamformer_enabled) {
    CgmmResult masks = cgmm_masks(spec, cfg.cgmm);
    SpatialCovariance noise_cov =
        estimate_covariances(spec, masks.noise, cfg.cgmm.reg_scale);
    SpatialCovariance speech_cov =
        estimate_covariances(spec, masks.speech, cfg.cgmm.reg_scale);
    spec = apply_beamformer(spec, mvdr_weights(noise_cov, speech_cov));
  } else if (spec.num_channels() > 1) {
    spec.channels.resize(1);
  }
  return istft(spec);
}

EnhanceResult cmd_enhance(const PipelineConfig& cfg,
                          const std::vector<std::string>& wav_paths) {
  if (wav_paths.empty()) throw ConfigError("enhance: no input files");
  if (cfg.selection_enabled && cfg.checkpoint.empty())
    throw ConfigError("enhance: selection requires paths.checkpoint");
  ensure_dir(cfg.out_dir);

  LoadedNet loaded;
  if (cfg.selection_enabled) loaded = load_net(cfg, cfg.checkpoint);
  const EmbedderConfig ecfg = embedder_config(cfg);

  struct Item {
    bool ok = false;
    std::string error;
    std::string log;
  };
  std::vector<Item> items(wav_paths.size());

  auto process = [&](int i) {
    Item& item = items[static_cast<std::size_t>(i)];
    const std::string& path = wav_paths[static_cast<std::size_t>(i)];
    try {
      const Waveform w = read_wav(path);
      if (cfg.beamformer_enabled && w.num_channels() < 2)
        throw Error("beamformer needs multichannel input");
      const Waveform enhanced = enhance_waveform(w, cfg);

      std::string decision = "keep_enhanced";
      std::string score_text = "-";
      const Waveform* output = &enhanced;
      Waveform original = to_mono(w, 0);
      if (cfg.selection_enabled) {
        const auto orig_emb = extract_embedding(original, *loaded.net, ecfg);
        const auto enh_emb = extract_embedding(enhanced, *loaded.net, ecfg);
        const double score = cosine_score(orig_emb, enh_emb);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", score);
        score_text = buf;
        if (select_enhanced(orig_emb, enh_emb, cfg.selection) ==
            SelectionDecision::keep_original) {
          decision = "keep_original";
          output = &original;
        }
      }
      const std::string out_path =
          (fs::path(cfg.out_dir) / (utt_id(path) + ".wav")).string();
      write_wav(*output, out_path, WavEncoding::float32);
      item.log = utt_id(path) + "\t" + score_text + "\t" + decision;
      item.ok = true;
    } catch (const std::exception& e) {
      item.error = e.what();
    }
  };

  if (cfg.workers > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(cfg.workers)
    for (int i = 0; i < static_cast<int>(wav_paths.size()); ++i) process(i);
  } else {
    for (int i = 0; i < static_cast<int>(wav_paths.size()); ++i) process(i);
  }

  EnhanceResult result;
  std::ofstream log((fs::path(cfg.out_dir) / "enhance_log.txt").string(),
                    std::ios::trunc);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].ok) {
      ++result.processed;
      result.log_lines.push_back(items[i].log);
      log << items[i].log << '\n';
    } else {
      ++result.failed;
      std::fprintf(stderr, "enhance: %s: %s\n", wav_paths[i].c_str(),
                   items[i].error.c_str());
    }
  }
  return result;
}

void cmd_simulate(const PipelineConfig& cfg) {
  ensure_dir(cfg.out_dir);
  auto rooms = sample_room_configs(cfg.simulate_rooms, mix_seed(cfg.seed, 11),
                                   cfg.room);
  for (int i = 0; i < static_cast<int>(rooms.size()); ++i) {
    for (int j = 0; j < cfg.rirs_per_room; ++j) {
      // same room geometry, fresh source placement per RIR
      RoomRanges fixed = cfg.room;
      fixed.lx_min = fixed.lx_max = rooms[static_cast<std::size_t>(i)].dimensions[0];
      fixed.ly_min = fixed.ly_max = rooms[static_cast<std::size_t>(i)].dimensions[1];
      fixed.lz_min = fixed.lz_max = rooms[static_cast<std::size_t>(i)].dimensions[2];
      fixed.reflection_min = fixed.reflection_max =
          rooms[static_cast<std::size_t>(i)].reflection[0];
      RoomConfig room =
          sample_room_configs(1, mix_seed(cfg.seed, 13, static_cast<std::uint64_t>(i),
                                          static_cast<std::uint64_t>(j)),
                              fixed)
              .front();

      char name[64];
      std::snprintf(name, sizeof(name), "room_%03d_%02d", i, j);
      write_room_config(room, (fs::path(cfg.out_dir) / (std::string(name) + ".txt")).string());

      const Rir rir = simulate_rir(room);
      Waveform rir_wav;
      rir_wav.sample_rate = rir.sample_rate;
      rir_wav.channels = rir.channels;
      std::size_t longest = 0;
      for (const auto& ch : rir_wav.channels) longest = std::max(longest, ch.size());
      for (auto& ch : rir_wav.channels) ch.resize(longest, 0.0);
      write_wav(rir_wav, (fs::path(cfg.out_dir) / (std::string(name) + ".wav")).string(),
                WavEncoding::float32);
    }
  }
}

TrainCmdResult cmd_train(const PipelineConfig& cfg) {
  if (cfg.manifest.empty()) throw ConfigError("train: paths.manifest required");
  ensure_dir(cfg.out_dir);

  std::ifstream is(cfg.manifest);
  if (!is) throw ConfigError("train: cannot open manifest: " + cfg.manifest);

  struct Entry {
    std::string path, speaker, domain;
  };
  std::vector<Entry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Entry e;
    ss >> e.path >> e.speaker >> e.domain;
    if (e.path.empty() || e.speaker.empty())
      throw ConfigError("train: malformed manifest line " + std::to_string(lineno));
    if (cfg.dat_enabled && e.domain.empty())
      throw ConfigError("train: DAT enabled but manifest line " +
                        std::to_string(lineno) + " has no domain id");
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw ConfigError("train: empty manifest");

  std::set<std::string> speaker_set, domain_set;
  for (const auto& e : entries) {
    speaker_set.insert(e.speaker);
    if (!e.domain.empty()) domain_set.insert(e.domain);
  }
  if (speaker_set.size() < 2)
    throw ConfigError("train: manifest must span at least two speakers");
  std::map<std::string, int> speaker_idx, domain_idx;
  for (const auto& s : speaker_set)
    speaker_idx.emplace(s, static_cast<int>(speaker_idx.size()));
  for (const auto& d : domain_set)
    domain_idx.emplace(d, static_cast<int>(domain_idx.size()));

  const EmbedderConfig ecfg = embedder_config(cfg);
  std::vector<TrainExample> data;
  for (const auto& e : entries) {
    TrainExample ex;
    ex.features = speech_features(to_mono(read_wav(e.path), 0), ecfg);
    ex.speaker = speaker_idx.at(e.speaker);
    ex.domain = e.domain.empty() ? 0 : domain_idx.at(e.domain);
    data.push_back(std::move(ex));
  }

  MicroNetConfig net_cfg = cfg.net;
  net_cfg.num_speakers = static_cast<int>(speaker_set.size());
  net_cfg.num_domains = std::max<int>(2, static_cast<int>(domain_set.size()));
  net_cfg.init_seed = mix_seed(cfg.seed, 21);
  MicroNet net(net_cfg);

  TrainCmdResult result;
  TrainConfig stage1 = cfg.train;
  stage1.seed = mix_seed(cfg.seed, 22);
  result.stage1 = train(net, data, stage1, /*dat_stage=*/false);
  if (cfg.dat_enabled) {
    TrainConfig stage2 = cfg.train;
    stage2.epochs = cfg.dat_epochs;
    stage2.learning_rate = cfg.dat_learning_rate;
    stage2.seed = mix_seed(cfg.seed, 23);
    result.stage2 = train(net, data, stage2, /*dat_stage=*/true);
  }

  result.checkpoint_path =
      cfg.checkpoint.empty()
          ? (fs::path(cfg.out_dir) / "checkpoint.ffnn").string()
          : cfg.checkpoint;
  save_checkpoint(net, result.checkpoint_path);

  std::ofstream hist((fs::path(cfg.out_dir) / "loss_history.txt").string(),
                     std::ios::trunc);
  auto dump = [&](const char* stage, const std::vector<EpochStats>& stats) {
    for (std::size_t i = 0; i < stats.size(); ++i) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s\t%zu\t%.6f\t%.6f\t%.4f", stage, i,
                    stats[i].speaker_loss, stats[i].domain_loss,
                    stats[i].speaker_accuracy);
      hist << buf << '\n';
    }
  };
  dump("stage1", result.stage1);
  dump("stage2", result.stage2);
  return result;
}

ScoreCmdResult cmd_score(const PipelineConfig& cfg) {
  if (cfg.checkpoint.empty()) throw ConfigError("score: paths.checkpoint required");
  if (cfg.trials.empty()) throw ConfigError("score: paths.trials required");
  if (cfg.wav_map.empty()) throw ConfigError("score: paths.wav_map required");
  ensure_dir(cfg.out_dir);

  LoadedNet loaded = load_net(cfg, cfg.checkpoint);
  const EmbedderConfig ecfg = embedder_config(cfg);
  const auto trials = read_trial_list(cfg.trials);
  if (trials.empty()) throw ConfigError("score: empty trial list");

  std::map<std::string, std::vector<std::string>> wav_map;
  {
    std::ifstream is(cfg.wav_map);
    if (!is) throw ConfigError("score: cannot open wav map: " + cfg.wav_map);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ss(line);
      std::string id, path;
      ss >> id >> path;
      if (id.empty() || path.empty())
        throw ConfigError("score: malformed wav map line: " + line);
      wav_map[id].push_back(path);
    }
  }

  std::set<std::string> ids;
  for (const auto& t : trials) {
    ids.insert(t.enroll_id);
    ids.insert(t.test_id);
  }
  std::vector<std::string> id_list(ids.begin(), ids.end());

  std::map<std::string, Embedding> embeddings;
  std::map<std::string, std::string> failures;
  std::vector<std::pair<bool, Embedding>> results(id_list.size());
  std::vector<std::string> errors(id_list.size());

  auto embed_id = [&](int i) {
    const std::string& id = id_list[static_cast<std::size_t>(i)];
    try {
      auto it = wav_map.find(id);
      if (it == wav_map.end()) throw Error("no wav mapped for id " + id);
      std::vector<Embedding> parts;
      for (const auto& path : it->second)
        parts.push_back(
            extract_embedding(to_mono(read_wav(path), 0), *loaded.net, ecfg));
      results[static_cast<std::size_t>(i)] = {
          true, parts.size() == 1 ? parts[0] : average_embeddings(parts)};
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  };

  if (cfg.workers > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(cfg.workers)
    for (int i = 0; i < static_cast<int>(id_list.size()); ++i) embed_id(i);
  } else {
    for (int i = 0; i < static_cast<int>(id_list.size()); ++i) embed_id(i);
  }
  for (std::size_t i = 0; i < id_list.size(); ++i) {
    if (results[i].first)
      embeddings[id_list[i]] = std::move(results[i].second);
    else
      failures[id_list[i]] = errors[i];
  }

  ScoreCmdResult out;
  out.labeled = true;
  for (const auto& t : trials) {
    auto e = embeddings.find(t.enroll_id);
    auto s = embeddings.find(t.test_id);
    if (e == embeddings.end() || s == embeddings.end()) {
      ++out.excluded;
      const std::string& bad = e == embeddings.end() ? t.enroll_id : t.test_id;
      std::fprintf(stderr, "score: trial %s %s excluded: %s\n", t.enroll_id.c_str(),
                   t.test_id.c_str(), failures[bad].c_str());
      continue;
    }
    ScoredTrial st;
    st.trial = t;
    st.score = cosine_score(e->second, s->second);
    if (t.label < 0) out.labeled = false;
    out.scored.push_back(std::move(st));
  }
  if (out.scored.empty()) throw Error("score: all trials excluded");

  write_scores(out.scored, (fs::path(cfg.out_dir) / "scores.tsv").string());
  if (out.labeled) {
    out.eer = eer(out.scored);
    out.dcf = min_dcf(out.scored, cfg.dcf);
    out.report = format_metrics_report(out.eer, out.dcf, cfg.dcf);
    std::ofstream rep((fs::path(cfg.out_dir) / "metrics.txt").string(), std::ios::trunc);
    rep << out.report << '\n';
    if (out.excluded > 0) rep << "excluded=" << out.excluded << '\n';
  }
  return out;
}

// ------------------------------------------------------------------ ablate --

namespace {

struct Devset {
  // close-talk enrollment utterances and far-field multichannel tests
  std::vector<std::vector<Waveform>> enroll;  // [speaker][utt] mono
  std::vector<Waveform> test;                 // multichannel
  std::vector<int> test_speaker;
  std::vector<TrainExample> train_data;
};

// training-side rooms; test rooms are deliberately harsher and held out so
// the enrollment/test mismatch survives the far-field training copies
RoomRanges ablate_room_ranges(int sample_rate) {
  RoomRanges r;
  r.lx_min = 4.0;
  r.lx_max = 6.0;
  r.ly_min = 4.0;
  r.ly_max = 6.0;
  r.lz_min = 2.6;
  r.lz_max = 3.2;
  r.reflection_min = 0.84;
  r.reflection_max = 0.88;
  r.distance_min = 1.6;
  r.distance_max = 2.2;
  r.mic_radius = 0.05;
  r.num_mics = 4;
  r.sample_rate = sample_rate;
  r.max_order = 30;
  return r;
}

RoomRanges ablate_test_room_ranges(int sample_rate) {
  RoomRanges r = ablate_room_ranges(sample_rate);
  r.reflection_min = 0.91;
  r.reflection_max = 0.94;
  r.distance_min = 2.4;
  r.distance_max = 3.2;
  return r;
}

Devset build_devset(const PipelineConfig& cfg) {
  const AblateConfig& ab = cfg.ablate;
  const int fs = ab.sample_rate;
  const EmbedderConfig ecfg = embedder_config(cfg);

  auto rooms =
      sample_room_configs(3, mix_seed(cfg.seed, 31), ablate_room_ranges(fs));
  std::vector<Rir> rirs;
  for (const auto& room : rooms) rirs.push_back(simulate_rir(room));
  auto test_rooms = sample_room_configs(3, mix_seed(cfg.seed, 37),
                                        ablate_test_room_ranges(fs));
  std::vector<Rir> test_rirs;
  for (const auto& room : test_rooms) test_rirs.push_back(simulate_rir(room));

  Devset dev;
  dev.enroll.resize(static_cast<std::size_t>(ab.speakers));
  for (int s = 0; s < ab.speakers; ++s) {
    // training utterances: clean close-talk plus far-field (channel 0) copies
    for (int u = 0; u < ab.train_utts; ++u) {
      Rng rng(mix_seed(cfg.seed, 32, static_cast<std::uint64_t>(s),
                       static_cast<std::uint64_t>(u)));
      Waveform clean = synth_utterance(s, rng, fs, ab.utt_seconds);
      TrainExample close;
      close.features = speech_features(clean, ecfg);
      close.speaker = s;
      close.domain = 0;
      dev.train_data.push_back(std::move(close));

      const Rir& rir = rirs[static_cast<std::size_t>((s * ab.train_utts + u) %
                                                     static_cast<int>(rirs.size()))];
      Waveform far = convolve_rir(clean, rir);
      Rng nrng(mix_seed(cfg.seed, 33, static_cast<std::uint64_t>(s),
                        static_cast<std::uint64_t>(u)));
      far = mix_noise(far, white_noise(far.num_samples(), far.num_channels(), fs, nrng),
                      ab.train_snr_db);
      TrainExample farfield;
      farfield.features = speech_features(to_mono(far, 0), ecfg);
      farfield.speaker = s;
      farfield.domain = 1;
      dev.train_data.push_back(std::move(farfield));
    }
    // enrollment: fresh clean utterances
    for (int u = 0; u < ab.enroll_utts; ++u) {
      Rng rng(mix_seed(cfg.seed, 34, static_cast<std::uint64_t>(s),
                       static_cast<std::uint64_t>(u)));
      dev.enroll[static_cast<std::size_t>(s)].push_back(
          synth_utterance(s, rng, fs, ab.utt_seconds));
    }
    // test: fresh far-field multichannel utterances
    for (int u = 0; u < ab.test_utts; ++u) {
      Rng rng(mix_seed(cfg.seed, 35, static_cast<std::uint64_t>(s),
                       static_cast<std::uint64_t>(u)));
      Waveform clean = synth_utterance(s, rng, fs, ab.utt_seconds);
      const Rir& rir =
          test_rirs[static_cast<std::size_t>((s * ab.test_utts + u) %
                                             static_cast<int>(test_rirs.size()))];
      Waveform far = convolve_rir(clean, rir);
      Rng nrng(mix_seed(cfg.seed, 36, static_cast<std::uint64_t>(s),
                        static_cast<std::uint64_t>(u)));
      far = mix_noise(far, white_noise(far.num_samples(), far.num_channels(), fs, nrng),
                      ab.snr_db);
      dev.test.push_back(std::move(far));
      dev.test_speaker.push_back(s);
    }
  }
  return dev;
}

void write_devset(const PipelineConfig& cfg, const Devset& dev) {
  const std::string root = (fs::path(cfg.out_dir) / "devset").string();
  ensure_dir(root);
  std::ofstream map(root + "/wav_map.txt", std::ios::trunc);
  std::vector<Trial> trials;
  for (int s = 0; s < static_cast<int>(dev.enroll.size()); ++s) {
    const std::string id = "spk" + std::to_string(s);
    for (int u = 0; u < static_cast<int>(dev.enroll[static_cast<std::size_t>(s)].size()); ++u) {
      const std::string path = root + "/enroll_" + std::to_string(s) + "_" +
                               std::to_string(u) + ".wav";
      write_wav(dev.enroll[static_cast<std::size_t>(s)][static_cast<std::size_t>(u)],
                path, WavEncoding::float32);
      map << id << ' ' << path << '\n';
    }
  }
  for (int i = 0; i < static_cast<int>(dev.test.size()); ++i) {
    const std::string id = "test" + std::to_string(i);
    const std::string path = root + "/" + id + ".wav";
    write_wav(dev.test[static_cast<std::size_t>(i)], path, WavEncoding::float32);
    map << id << ' ' << path << '\n';
    for (int s = 0; s < static_cast<int>(dev.enroll.size()); ++s) {
      Trial t;
      t.enroll_id = "spk" + std::to_string(s);
      t.test_id = id;
      t.label = dev.test_speaker[static_cast<std::size_t>(i)] == s ? 1 : 0;
      trials.push_back(std::move(t));
    }
  }
  write_trial_list(trials, root + "/trials.txt");
}

}  // namespace

AblateResult cmd_ablate(const PipelineConfig& cfg) {
  ensure_dir(cfg.out_dir);
  const AblateConfig& ab = cfg.ablate;
  if (ab.speakers < 2) throw ConfigError("ablate: need at least two speakers");

  Devset dev = build_devset(cfg);
  write_devset(cfg, dev);
  const EmbedderConfig ecfg = embedder_config(cfg);

  // two checkpoints: speaker-only and DAT fine-tuned
  MicroNetConfig net_cfg = cfg.net;
  net_cfg.num_speakers = ab.speakers;
  net_cfg.num_domains = 2;
  net_cfg.init_seed = mix_seed(cfg.seed, 41);
  MicroNet net_plain(net_cfg);
  TrainConfig stage1 = cfg.train;
  stage1.seed = mix_seed(cfg.seed, 42);
  train(net_plain, dev.train_data, stage1, /*dat_stage=*/false);

  MicroNet net_dat(net_cfg);
  copy_params(net_plain, net_dat);
  TrainConfig stage2 = cfg.train;
  stage2.epochs = cfg.dat_epochs;
  stage2.learning_rate = cfg.dat_learning_rate;
  stage2.seed = mix_seed(cfg.seed, 43);
  train(net_dat, dev.train_data, stage2, /*dat_stage=*/true);

  MicroNet* nets[2] = {&net_plain, &net_dat};

  // enhancement depends only on the (wpe, beamformer) pair; cache the four
  const int n_test = static_cast<int>(dev.test.size());
  std::vector<std::vector<Waveform>> enhanced(4);
  for (int combo = 0; combo < 4; ++combo) {
    PipelineConfig stage_cfg = cfg;
    stage_cfg.wpe_enabled = (combo & 2) != 0;
    stage_cfg.beamformer_enabled = (combo & 1) != 0;
    enhanced[static_cast<std::size_t>(combo)].resize(static_cast<std::size_t>(n_test));
    for (int i = 0; i < n_test; ++i)
      enhanced[static_cast<std::size_t>(combo)][static_cast<std::size_t>(i)] =
          enhance_waveform(dev.test[static_cast<std::size_t>(i)], stage_cfg);
  }

  // embeddings: [net][combo][utt] and per-speaker enrollment averages
  std::vector<std::vector<std::vector<Embedding>>> test_emb(2);
  std::vector<std::vector<Embedding>> enroll_emb(2);
  for (int k = 0; k < 2; ++k) {
    test_emb[static_cast<std::size_t>(k)].resize(4);
    for (int combo = 0; combo < 4; ++combo) {
      auto& dst = test_emb[static_cast<std::size_t>(k)][static_cast<std::size_t>(combo)];
      dst.resize(static_cast<std::size_t>(n_test));
      for (int i = 0; i < n_test; ++i)
        dst[static_cast<std::size_t>(i)] = extract_embedding(
            enhanced[static_cast<std::size_t>(combo)][static_cast<std::size_t>(i)],
            *nets[k], ecfg);
    }
    enroll_emb[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(ab.speakers));
    for (int s = 0; s < ab.speakers; ++s) {
      std::vector<Embedding> parts;
      for (const auto& w : dev.enroll[static_cast<std::size_t>(s)])
        parts.push_back(extract_embedding(w, *nets[k], ecfg));
      enroll_emb[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)] =
          average_embeddings(parts);
    }
  }

  AblateResult result;
  std::ostringstream table;
  table << "WPE Beamformer DAT DataSelection EER(%) minDCF\n";
  for (int bits = 0; bits < 16; ++bits) {
    AblateRow row;
    row.wpe = (bits & 8) != 0;
    row.beamformer = (bits & 4) != 0;
    row.dat = (bits & 2) != 0;
    row.selection = (bits & 1) != 0;
    const int k = row.dat ? 1 : 0;
    const int combo = (row.wpe ? 2 : 0) | (row.beamformer ? 1 : 0);

    std::vector<ScoredTrial> trials;
    for (int i = 0; i < n_test; ++i) {
      const Embedding* emb =
          &test_emb[static_cast<std::size_t>(k)][static_cast<std::size_t>(combo)]
                   [static_cast<std::size_t>(i)];
      if (row.selection) {
        const Embedding& original =
            test_emb[static_cast<std::size_t>(k)][0][static_cast<std::size_t>(i)];
        if (select_enhanced(original, *emb, cfg.selection) ==
            SelectionDecision::keep_original)
          emb = &original;
      }
      for (int s = 0; s < ab.speakers; ++s) {
        ScoredTrial st;
        st.trial.enroll_id = "spk" + std::to_string(s);
        st.trial.test_id = "test" + std::to_string(i);
        st.trial.label = dev.test_speaker[static_cast<std::size_t>(i)] == s ? 1 : 0;
        st.score = cosine_score(
            enroll_emb[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)], *emb);
        trials.push_back(std::move(st));
      }
    }
    row.eer = eer(trials).eer;
    row.min_dcf = min_dcf(trials, cfg.dcf).min_dcf;
    result.rows.push_back(row);

    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-3s %-10s %-3s %-13s %7.3f %7.4f\n",
                  row.wpe ? "yes" : "no", row.beamformer ? "yes" : "no",
                  row.dat ? "yes" : "no", row.selection ? "yes" : "no",
                  row.eer * 100.0, row.min_dcf);
    table << buf;
  }
  result.table = table.str();

  std::ofstream os((fs::path(cfg.out_dir) / "ablation.txt").string(), std::ios::trunc);
  os << result.table;
  return result;
}

TuneCmdResult cmd_tune_theta(const PipelineConfig& cfg) {
  if (cfg.checkpoint.empty())
    throw ConfigError("tune-theta: paths.checkpoint required");
  ensure_dir(cfg.out_dir);

  LoadedNet loaded = load_net(cfg, cfg.checkpoint);
  const EmbedderConfig ecfg = embedder_config(cfg);
  const int fs = cfg.ablate.sample_rate;

  // "true" far-field conditions for the dev tests
  RoomRanges truth = ablate_room_ranges(fs);
  auto truth_rooms = sample_room_configs(2, mix_seed(cfg.seed, 51), truth);
  std::vector<Rir> truth_rirs;
  for (const auto& r : truth_rooms) truth_rirs.push_back(simulate_rir(r));

  // candidate RIR parameter sets sweep the reflection strength
  std::vector<RoomRanges> candidates;
  for (int i = 0; i < cfg.tune.rir_candidates; ++i) {
    RoomRanges c = truth;
    const double span = 0.9 - 0.3;
    c.reflection_min = 0.3 + span * i / cfg.tune.rir_candidates;
    c.reflection_max = 0.3 + span * (i + 1) / cfg.tune.rir_candidates;
    candidates.push_back(c);
  }
  std::vector<std::vector<Rir>> candidate_rirs;
  for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
    auto rooms = sample_room_configs(
        2, mix_seed(cfg.seed, 52, static_cast<std::uint64_t>(i)),
        candidates[static_cast<std::size_t>(i)]);
    std::vector<Rir> rirs;
    for (const auto& r : rooms) rirs.push_back(simulate_rir(r));
    candidate_rirs.push_back(std::move(rirs));
  }

  std::vector<std::vector<DevPair>> dev_sets(candidates.size());
  for (int s = 0; s < cfg.tune.speakers; ++s) {
    for (int u = 0; u < cfg.tune.pairs_per_speaker; ++u) {
      Rng rng(mix_seed(cfg.seed, 53, static_cast<std::uint64_t>(s),
                       static_cast<std::uint64_t>(u)));
      Waveform enroll_clean = synth_utterance(s, rng, fs, cfg.ablate.utt_seconds);
      Rng rng2(mix_seed(cfg.seed, 54, static_cast<std::uint64_t>(s),
                        static_cast<std::uint64_t>(u)));
      Waveform test_clean = synth_utterance(s, rng2, fs, cfg.ablate.utt_seconds);
      const Rir& rir =
          truth_rirs[static_cast<std::size_t>((s + u) % static_cast<int>(truth_rirs.size()))];
      Rng nrng(mix_seed(cfg.seed, 55, static_cast<std::uint64_t>(s),
                        static_cast<std::uint64_t>(u)));
      Waveform far = convolve_rir(test_clean, rir);
      far = mix_noise(far, white_noise(far.num_samples(), far.num_channels(), fs, nrng),
                      cfg.ablate.snr_db);

      const Embedding original =
          extract_embedding(enroll_clean, *loaded.net, ecfg);
      const Embedding test_emb =
          extract_embedding(to_mono(far, 0), *loaded.net, ecfg);

      for (int c = 0; c < static_cast<int>(candidates.size()); ++c) {
        const Rir& crir = candidate_rirs[static_cast<std::size_t>(c)][static_cast<std::size_t>(
            (s + u) % 2)];
        Waveform sim = convolve_rir(enroll_clean, crir);
        DevPair pair;
        pair.original_enroll = original;
        pair.simulated_enroll = extract_embedding(to_mono(sim, 0), *loaded.net, ecfg);
        pair.test = test_emb;
        pair.speaker = "spk" + std::to_string(s);
        dev_sets[static_cast<std::size_t>(c)].push_back(std::move(pair));
      }
    }
  }

  TuneCmdResult out;
  out.tuned = tune_theta(dev_sets, cfg.tune.thetas);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "theta=%g rir_set=%d reflection=[%.3f,%.3f] dev_eer=%.4f",
                out.tuned.theta, out.tuned.rir_set_index,
                candidates[static_cast<std::size_t>(out.tuned.rir_set_index)].reflection_min,
                candidates[static_cast<std::size_t>(out.tuned.rir_set_index)].reflection_max,
                out.tuned.dev_eer);
  out.report = buf;
  std::ofstream os((fs::path(cfg.out_dir) / "tune_result.txt").string(), std::ios::trunc);
  os << out.report << '\n';
  return out;
}

}  // namespace ffsv
