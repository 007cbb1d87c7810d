#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "ffsv/config.hpp"
#include "ffsv/error.hpp"
#include "ffsv/pipeline.hpp"
#include "ffsv/rng.hpp"
#include "ffsv/wav_io.hpp"

using namespace ffsv;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  os << text;
  return path.string();
}

// small net so the integration tests stay fast
std::string tiny_net_config_text() {
  return "net.input_frames = 32\n"
         "net.stem_channels = 4\n"
         "net.blocks = 2:4:2:2:bam\n"
         "net.reduction = 2\n"
         "net.embedding_dim = 8\n"
         "net.domain_hidden = 4\n"
         "train.batch_size = 16\n"
         "train.learning_rate = 0.05\n"
         "train.epochs = 4\n"
         "train.dat_epochs = 2\n"
         "train.crop_frames = 32\n";
}

// writes wavs + manifest, returns the manifest path
std::string make_training_set(const fs::path& dir, int speakers, int utts) {
  std::string manifest;
  for (int s = 0; s < speakers; ++s)
    for (int u = 0; u < utts; ++u) {
      Rng rng(1000 + static_cast<std::uint64_t>(s) * 97 + static_cast<std::uint64_t>(u));
      Waveform w = synth_utterance(s, rng, 8000, 0.9);
      const std::string path =
          (dir / ("train_" + std::to_string(s) + "_" + std::to_string(u) + ".wav")).string();
      write_wav(w, path, WavEncoding::float32);
      manifest += path + " spk" + std::to_string(s) + " " + std::to_string(u % 2) + "\n";
    }
  return write_text(dir / "manifest.txt", manifest);
}

}  // namespace

TEST_CASE("config parser accepts known keys and rejects unknown ones") {
  PipelineConfig cfg;
  apply_config_line(cfg, "stages.wpe = on", 1);
  apply_config_line(cfg, "selection.theta = 0.65", 2);
  apply_config_line(cfg, "net.blocks = 2:4:2:2:bam,4:8:1:1:plain", 3);
  apply_config_line(cfg, "# comment", 4);
  apply_config_line(cfg, "", 5);
  CHECK(cfg.wpe_enabled);
  CHECK(cfg.selection.theta == 0.65);
  REQUIRE(cfg.net.blocks.size() == 2);
  CHECK(cfg.net.blocks[1].bam == false);
  CHECK(cfg.net.blocks[0].stride_t == 2);

  CHECK_THROWS_AS(apply_config_line(cfg, "stages.wep = on", 6), ConfigError);
  CHECK_THROWS_AS(apply_config_line(cfg, "selection.theta = high", 7), ConfigError);
  CHECK_THROWS_AS(apply_config_line(cfg, "just words", 8), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/ffsv.cfg"), ConfigError);
}

TEST_CASE("enhance with all stages off copies channel 0 bit-exactly") {
  auto dir = fresh_dir("ffsv_passthrough");
  Rng rng(3);
  Waveform w;
  w.sample_rate = 8000;
  w.channels.resize(4);
  for (auto& ch : w.channels) {
    ch.resize(4000);
    for (auto& s : ch) {
      const int q = rng.uniform_int(-32768, 32767);
      s = static_cast<double>(q) / 32768.0;
    }
  }
  const std::string in_path = (dir / "input.wav").string();
  write_wav(w, in_path, WavEncoding::pcm16);

  PipelineConfig cfg;
  cfg.out_dir = (dir / "out").string();
  auto result = cmd_enhance(cfg, {in_path});
  CHECK(result.processed == 1);
  CHECK(result.failed == 0);

  Waveform out = read_wav((dir / "out" / "input.wav").string());
  REQUIRE(out.num_channels() == 1);
  REQUIRE(out.num_samples() == 4000);
  for (std::size_t i = 0; i < 4000; ++i)
    CHECK(out.channels[0][i] == w.channels[0][i]);
  CHECK(fs::exists(dir / "out" / "enhance_log.txt"));
}

TEST_CASE("train writes reproducible checkpoints and validates the manifest") {
  auto dir = fresh_dir("ffsv_train_cmd");
  const std::string manifest = make_training_set(dir, 3, 4);
  const std::string cfg_path = write_text(
      dir / "pipe.cfg", tiny_net_config_text() + "paths.manifest = " + manifest +
                            "\npaths.out_dir = " + (dir / "out").string() + "\n");

  PipelineConfig cfg = load_config(cfg_path);
  cfg.seed = 5;
  auto r1 = cmd_train(cfg);
  CHECK(fs::exists(r1.checkpoint_path));
  CHECK(fs::exists(dir / "out" / "loss_history.txt"));
  REQUIRE(r1.stage1.size() == 4);
  CHECK(r1.stage2.empty());

  // same seed, byte-identical checkpoint
  auto read_bytes = [](const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)),
                       std::istreambuf_iterator<char>());
  };
  const std::string first = read_bytes(r1.checkpoint_path);
  auto r2 = cmd_train(cfg);
  CHECK(read_bytes(r2.checkpoint_path) == first);

  // DAT stage gets exercised when enabled
  cfg.dat_enabled = true;
  auto r3 = cmd_train(cfg);
  CHECK(r3.stage2.size() == 2);

  // manifest without domain ids fails when DAT is on
  std::string no_domain;
  for (int s = 0; s < 2; ++s) {
    Rng rng(40 + static_cast<std::uint64_t>(s));
    Waveform w = synth_utterance(s, rng, 8000, 0.9);
    const std::string p = (dir / ("nd" + std::to_string(s) + ".wav")).string();
    write_wav(w, p, WavEncoding::float32);
    no_domain += p + " spk" + std::to_string(s) + "\n";
  }
  cfg.manifest = write_text(dir / "manifest_nd.txt", no_domain);
  CHECK_THROWS_AS(cmd_train(cfg), ConfigError);

  // single-speaker manifest is rejected
  cfg.dat_enabled = false;
  std::string single;
  {
    Rng rng(77);
    Waveform w = synth_utterance(0, rng, 8000, 0.9);
    const std::string p = (dir / "single.wav").string();
    write_wav(w, p, WavEncoding::float32);
    single = p + " spk0 0\n" + p + " spk0 1\n";
  }
  cfg.manifest = write_text(dir / "manifest_single.txt", single);
  CHECK_THROWS_AS(cmd_train(cfg), ConfigError);
}

TEST_CASE("score command: self trial, metrics, exclusions") {
  auto dir = fresh_dir("ffsv_score_cmd");
  const std::string manifest = make_training_set(dir, 3, 4);
  const std::string cfg_path = write_text(
      dir / "pipe.cfg", tiny_net_config_text() + "paths.manifest = " + manifest +
                            "\npaths.out_dir = " + (dir / "out").string() + "\n");
  PipelineConfig cfg = load_config(cfg_path);
  cfg.seed = 9;
  auto trained = cmd_train(cfg);

  // wav map: one enrolled id with two wavs (averaged), plus test ids
  std::string wav_map;
  wav_map += "enroll0 " + (dir / "train_0_0.wav").string() + "\n";
  wav_map += "enroll0 " + (dir / "train_0_1.wav").string() + "\n";
  wav_map += "self " + (dir / "train_1_0.wav").string() + "\n";
  wav_map += "missing " + (dir / "does_not_exist.wav").string() + "\n";
  const std::string map_path = write_text(dir / "wav_map.txt", wav_map);

  std::string trials;
  trials += "self self 1\n";
  trials += "enroll0 self 0\n";
  trials += "missing self 1\n";  // excluded: unreadable audio
  const std::string trials_path = write_text(dir / "trials.txt", trials);

  cfg.checkpoint = trained.checkpoint_path;
  cfg.trials = trials_path;
  cfg.wav_map = map_path;
  auto result = cmd_score(cfg);
  CHECK(result.excluded == 1);
  REQUIRE(result.scored.size() == 2);
  CHECK(result.scored[0].score == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(result.labeled);
  CHECK(result.report.find("EER=") == 0);
  CHECK(fs::exists(dir / "out" / "scores.tsv"));
  CHECK(fs::exists(dir / "out" / "metrics.txt"));

  // unlabeled trials: scores only
  const std::string trials2 = write_text(dir / "trials2.txt", "self self\n");
  cfg.trials = trials2;
  auto r2 = cmd_score(cfg);
  CHECK_FALSE(r2.labeled);
  CHECK(r2.report.empty());
}

TEST_CASE("enhance with selection and an impossible threshold keeps originals") {
  auto dir = fresh_dir("ffsv_select_cmd");
  const std::string manifest = make_training_set(dir, 2, 3);
  const std::string cfg_path = write_text(
      dir / "pipe.cfg", tiny_net_config_text() + "paths.manifest = " + manifest +
                            "\npaths.out_dir = " + (dir / "out").string() + "\n");
  PipelineConfig cfg = load_config(cfg_path);
  cfg.seed = 13;
  auto trained = cmd_train(cfg);

  // multichannel input so the whole chain is exercised
  Rng rng(17);
  Waveform mono = synth_utterance(0, rng, 8000, 0.9);
  Waveform multi;
  multi.sample_rate = 8000;
  for (int c = 0; c < 4; ++c) multi.channels.push_back(mono.channels[0]);
  const std::string in_path = (dir / "utt.wav").string();
  write_wav(multi, in_path, WavEncoding::float32);

  cfg.checkpoint = trained.checkpoint_path;
  cfg.selection_enabled = true;
  cfg.selection.theta = 1.01;  // impossible: cosine <= 1
  cfg.out_dir = (dir / "enh").string();
  auto result = cmd_enhance(cfg, {in_path});
  REQUIRE(result.processed == 1);
  REQUIRE(result.log_lines.size() == 1);
  CHECK(result.log_lines[0].find("keep_original") != std::string::npos);

  // selection without a checkpoint is a config error
  cfg.checkpoint.clear();
  CHECK_THROWS_AS(cmd_enhance(cfg, {in_path}), ConfigError);
}

TEST_CASE("per-file enhance failures are counted, not fatal") {
  auto dir = fresh_dir("ffsv_fail_cmd");
  Rng rng(19);
  Waveform w = synth_utterance(1, rng, 8000, 0.9);
  const std::string good = (dir / "good.wav").string();
  write_wav(w, good, WavEncoding::float32);

  PipelineConfig cfg;
  cfg.out_dir = (dir / "out").string();
  auto result = cmd_enhance(cfg, {good, (dir / "missing.wav").string()});
  CHECK(result.processed == 1);
  CHECK(result.failed == 1);
}

TEST_CASE("simulate writes readable rirs and room configs") {
  auto dir = fresh_dir("ffsv_sim_cmd");
  PipelineConfig cfg;
  cfg.out_dir = dir.string();
  cfg.simulate_rooms = 2;
  cfg.rirs_per_room = 2;
  cfg.room.max_order = 3;
  cfg.seed = 21;
  cmd_simulate(cfg);

  int rir_count = 0, cfg_count = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("room_", 0) == 0 && name.ends_with(".wav")) {
      auto rir = read_wav(entry.path().string());
      CHECK(rir.num_channels() == 4);
      ++rir_count;
    }
    if (name.rfind("room_", 0) == 0 && name.ends_with(".txt")) {
      auto room = read_room_config(entry.path().string());
      CHECK(room.mics.size() == 4);
      ++cfg_count;
    }
  }
  CHECK(rir_count == 4);
  CHECK(cfg_count == 4);
}

TEST_CASE("cli binary exit codes: 0 ok, 1 partial, 2 config error") {
  auto dir = fresh_dir("ffsv_cli_exit");
  Rng rng(23);
  Waveform w = synth_utterance(0, rng, 8000, 0.9);
  const std::string good = (dir / "good.wav").string();
  write_wav(w, good, WavEncoding::float32);

  auto run = [&](const std::string& args) {
    const std::string cmd = std::string(FFSV_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };

  CHECK(run("enhance --out " + (dir / "o1").string() + " " + good) == 0);
  CHECK(run("enhance --out " + (dir / "o2").string() + " " + good + " " +
            (dir / "nope.wav").string()) == 1);

  const std::string bad_cfg = write_text(dir / "bad.cfg", "paths.nonsense = 1\n");
  CHECK(run("enhance --config " + bad_cfg + " " + good) == 2);
  CHECK(run("score") == 2);  // missing required paths
}
