#pragma once

#include <string>

#include "ffsv/waveform.hpp"

namespace ffsv {

enum class WavEncoding { pcm16, float32 };

// RIFF/WAVE reader. Accepts little-endian PCM-16 and IEEE-float-32 with 1-8
// channels; fmt and data chunks are required, any other chunk is skipped.
// PCM-16 samples are scaled by 1/32768.
Waveform read_wav(const std::string& path);

// Writer for the same container. pcm16 saturates samples outside [-1, 1].
void write_wav(const Waveform& w, const std::string& path, WavEncoding encoding);

}  // namespace ffsv
