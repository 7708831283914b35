#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vgs/common.hpp"

namespace vgs {

struct Waveform {
  std::vector<double> samples;  // in [-1, 1)
  int sample_rate = 16000;
};

// Reads RIFF/PCM, 16-bit, mono, 16 kHz. Anything else is an error that
// names what was found.
Waveform load_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& w);

struct MfccConfig {
  int sample_rate = 16000;
  double window_s = 0.025;
  double shift_s = 0.010;
  double preemphasis = 0.97;
  int mel_filters = 40;
  int cepstra = 12;        // c1..c12; c0 is replaced by log energy
  int delta_window = 2;    // regression half-width for the delta features
  bool cmvn = true;
  double variance_floor = 1e-10;
  double energy_floor = 1e-10;
};

// Rows are frames. Base layout per frame: cepstra c1..c12, then log energy,
// then the deltas and delta-deltas of that block, 39 columns in total.
struct FeatureSequence {
  std::string utterance_id;
  Matrix frames;
  double window_s = 0.025;
  double shift_s = 0.010;
};

// Number of frames for n samples: floor((n - window) / shift) + 1.
int frame_count(std::size_t samples, const MfccConfig& cfg);

FeatureSequence compute_mfcc(const Waveform& w, const MfccConfig& cfg,
                             const std::string& utterance_id);

// Per-utterance, per-column mean subtraction; unit variance scaling is
// skipped for columns whose variance is at or below the floor.
void apply_cmvn(Matrix& m, double variance_floor = 1e-10);

// Appends first- and second-order regression deltas (edge frames repeat).
Matrix append_deltas(const Matrix& base, int half_width);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

struct FrameRange {
  int begin = 0;
  int end = 0;  // exclusive
  bool clamped = false;
};

// Frames whose window center falls inside [start_s, end_s). An end time
// beyond the utterance clamps to the frame count and sets `clamped`.
FrameRange frames_for_interval(const FeatureSequence& fs, double start_s, double end_s);

// In-place radix-2 FFT over interleaved complex (re, im) pairs; n must be a
// power of two. Exposed for testing against a direct transform.
void fft_radix2(std::vector<double>& re, std::vector<double>& im);

}  // namespace vgs
