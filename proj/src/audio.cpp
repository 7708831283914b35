#include "vgs/audio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace vgs {

namespace {

std::uint32_t rd_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("wav: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t rd_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  if (!is) throw std::runtime_error("wav: truncated file");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void wr_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<char*>(b), 4);
}

void wr_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<char*>(b), 2);
}

}  // namespace

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("wav: cannot open: " + path.string());
  char tag[4];
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "RIFF", 4) != 0)
    throw std::runtime_error("wav: not a RIFF file: " + path.string());
  rd_u32(is);
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "WAVE", 4) != 0)
    throw std::runtime_error("wav: not a WAVE file: " + path.string());

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<char> data;
  bool have_data = false;
  while (is.read(tag, 4)) {
    std::uint32_t size = rd_u32(is);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = rd_u16(is);
      channels = rd_u16(is);
      rate = rd_u32(is);
      rd_u32(is);
      rd_u16(is);
      bits = rd_u16(is);
      if (size > 16) is.ignore(size - 16);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(size);
      is.read(data.data(), size);
      if (!is) throw std::runtime_error("wav: truncated data chunk: " + path.string());
      have_data = true;
    } else {
      is.ignore(size + (size & 1));
    }
  }
  if (!have_fmt || !have_data)
    throw std::runtime_error("wav: missing fmt or data chunk: " + path.string());
  if (format != 1)
    throw std::runtime_error("wav: only PCM supported, got format " + std::to_string(format));
  if (channels != 1)
    throw std::runtime_error("wav: mono required, got " + std::to_string(channels) + " channels");
  if (rate != 16000)
    throw std::runtime_error("wav: 16 kHz required, got " + std::to_string(rate) + " Hz");
  if (bits != 16)
    throw std::runtime_error("wav: 16-bit samples required, got " + std::to_string(bits));

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  std::size_t n = data.size() / 2;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::int16_t s;
    std::memcpy(&s, data.data() + 2 * i, 2);
    w.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("wav: cannot open for write: " + path.string());
  std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  os.write("RIFF", 4);
  wr_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  wr_u32(os, 16);
  wr_u16(os, 1);
  wr_u16(os, 1);
  wr_u32(os, static_cast<std::uint32_t>(w.sample_rate));
  wr_u32(os, static_cast<std::uint32_t>(w.sample_rate * 2));
  wr_u16(os, 2);
  wr_u16(os, 16);
  os.write("data", 4);
  wr_u32(os, data_bytes);
  for (double x : w.samples) {
    double c = std::max(-1.0, std::min(x, 32767.0 / 32768.0));
    std::int16_t s = static_cast<std::int16_t>(std::lround(c * 32768.0));
    wr_u16(os, static_cast<std::uint16_t>(s));
  }
  if (!os) throw std::runtime_error("wav: write failed: " + path.string());
}

void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
  std::size_t n = re.size();
  if (n != im.size()) throw std::invalid_argument("fft: re/im size mismatch");
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    double wr = std::cos(ang), wi = std::sin(ang);
    for (std::size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t j = 0; j < len / 2; ++j) {
        std::size_t a = i + j, b = i + j + len / 2;
        double tr = re[b] * cr - im[b] * ci;
        double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

int frame_count(std::size_t samples, const MfccConfig& cfg) {
  std::size_t window = static_cast<std::size_t>(std::lround(cfg.window_s * cfg.sample_rate));
  std::size_t shift = static_cast<std::size_t>(std::lround(cfg.shift_s * cfg.sample_rate));
  if (samples < window) return 0;
  return static_cast<int>((samples - window) / shift) + 1;
}

void apply_cmvn(Matrix& m, double variance_floor) {
  if (m.rows == 0) return;
  for (int c = 0; c < m.cols; ++c) {
    double lo = m.at(0, c), hi = lo;
    for (int r = 1; r < m.rows; ++r) {
      lo = std::min(lo, m.at(r, c));
      hi = std::max(hi, m.at(r, c));
    }
    if (lo == hi) {
      for (int r = 0; r < m.rows; ++r) m.at(r, c) = 0.0;
      continue;
    }
    double mean = 0;
    for (int r = 0; r < m.rows; ++r) mean += m.at(r, c);
    mean /= m.rows;
    double var = 0;
    for (int r = 0; r < m.rows; ++r) {
      double d = m.at(r, c) - mean;
      var += d * d;
    }
    var /= m.rows;
    double inv = var > variance_floor ? 1.0 / std::sqrt(var) : 1.0;
    for (int r = 0; r < m.rows; ++r) m.at(r, c) = (m.at(r, c) - mean) * inv;
  }
}

namespace {

Matrix regression_delta(const Matrix& x, int half_width) {
  Matrix d(x.rows, x.cols);
  double denom = 0;
  for (int n = 1; n <= half_width; ++n) denom += 2.0 * n * n;
  auto clamp_row = [&](int r) { return std::max(0, std::min(r, x.rows - 1)); };
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < x.cols; ++c) {
      double s = 0;
      for (int n = 1; n <= half_width; ++n)
        s += n * (x.at(clamp_row(r + n), c) - x.at(clamp_row(r - n), c));
      d.at(r, c) = s / denom;
    }
  return d;
}

}  // namespace

Matrix append_deltas(const Matrix& base, int half_width) {
  Matrix d1 = regression_delta(base, half_width);
  Matrix d2 = regression_delta(d1, half_width);
  Matrix out(base.rows, base.cols * 3);
  for (int r = 0; r < base.rows; ++r)
    for (int c = 0; c < base.cols; ++c) {
      out.at(r, c) = base.at(r, c);
      out.at(r, base.cols + c) = d1.at(r, c);
      out.at(r, 2 * base.cols + c) = d2.at(r, c);
    }
  return out;
}

FeatureSequence compute_mfcc(const Waveform& w, const MfccConfig& cfg,
                             const std::string& utterance_id) {
  if (w.sample_rate != cfg.sample_rate)
    throw std::invalid_argument("mfcc: waveform is " + std::to_string(w.sample_rate) +
                                " Hz, config expects " + std::to_string(cfg.sample_rate));
  int window = static_cast<int>(std::lround(cfg.window_s * cfg.sample_rate));
  int shift = static_cast<int>(std::lround(cfg.shift_s * cfg.sample_rate));
  int t = frame_count(w.samples.size(), cfg);
  if (t <= 0)
    throw std::invalid_argument("mfcc: waveform shorter than one window (" +
                                std::to_string(w.samples.size()) + " samples)");

  // Pre-emphasis over the whole signal; the first sample keeps no history.
  std::vector<double> emph(w.samples.size());
  emph[0] = w.samples[0] * (1.0 - cfg.preemphasis);
  for (std::size_t i = 1; i < w.samples.size(); ++i)
    emph[i] = w.samples[i] - cfg.preemphasis * w.samples[i - 1];

  std::size_t nfft = 1;
  while (nfft < static_cast<std::size_t>(window)) nfft <<= 1;
  std::size_t bins = nfft / 2 + 1;

  std::vector<double> hamming(window);
  for (int i = 0; i < window; ++i)
    hamming[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (window - 1));

  // Triangular mel filters between 0 Hz and Nyquist, equally spaced in mel.
  int m = cfg.mel_filters;
  std::vector<double> edges(m + 2);
  double mel_hi = hz_to_mel(cfg.sample_rate / 2.0);
  for (int j = 0; j < m + 2; ++j) edges[j] = mel_to_hz(mel_hi * j / (m + 1));
  Matrix fbank(m, static_cast<int>(bins), 0.0);
  for (int f = 0; f < m; ++f) {
    double lo = edges[f], mid = edges[f + 1], hi = edges[f + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      double hz = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(nfft);
      double wgt = 0;
      if (hz > lo && hz < mid)
        wgt = (hz - lo) / (mid - lo);
      else if (hz >= mid && hz < hi)
        wgt = (hi - hz) / (hi - mid);
      fbank.at(f, static_cast<int>(k)) = wgt;
    }
  }

  int base_cols = cfg.cepstra + 1;
  Matrix base(t, base_cols);
  std::vector<double> re(nfft), im(nfft), logmel(m);
  for (int fr = 0; fr < t; ++fr) {
    const double* raw = w.samples.data() + static_cast<std::size_t>(fr) * shift;
    double energy = 0;
    for (int i = 0; i < window; ++i) energy += raw[i] * raw[i];
    base.at(fr, cfg.cepstra) = std::log(std::max(energy, cfg.energy_floor));

    const double* src = emph.data() + static_cast<std::size_t>(fr) * shift;
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    for (int i = 0; i < window; ++i) re[i] = src[i] * hamming[i];
    fft_radix2(re, im);
    for (int f = 0; f < m; ++f) {
      double acc = 0;
      for (std::size_t k = 0; k < bins; ++k)
        acc += fbank.at(f, static_cast<int>(k)) * (re[k] * re[k] + im[k] * im[k]);
      logmel[f] = std::log(std::max(acc, cfg.energy_floor));
    }
    double norm = std::sqrt(2.0 / m);
    for (int j = 1; j <= cfg.cepstra; ++j) {
      double s = 0;
      for (int q = 0; q < m; ++q)
        s += logmel[q] * std::cos(std::numbers::pi * j * (q + 0.5) / m);
      base.at(fr, j - 1) = norm * s;
    }
  }

  Matrix feats = append_deltas(base, cfg.delta_window);
  if (cfg.cmvn) apply_cmvn(feats, cfg.variance_floor);

  FeatureSequence fs;
  fs.utterance_id = utterance_id;
  fs.frames = std::move(feats);
  fs.window_s = cfg.window_s;
  fs.shift_s = cfg.shift_s;
  return fs;
}

FrameRange frames_for_interval(const FeatureSequence& fs, double start_s, double end_s) {
  if (start_s < 0) throw std::invalid_argument("frames_for_interval: negative start time");
  if (!(start_s < end_s)) throw std::invalid_argument("frames_for_interval: start must precede end");
  auto first_center_at_or_after = [&](double t) {
    double k = (t - fs.window_s / 2.0) / fs.shift_s;
    int idx = static_cast<int>(std::ceil(k));
    return std::max(0, idx);
  };
  FrameRange r;
  r.begin = first_center_at_or_after(start_s);
  r.end = first_center_at_or_after(end_s);
  if (r.begin > fs.frames.rows) {
    r.begin = fs.frames.rows;
    r.clamped = true;
  }
  if (r.end > fs.frames.rows) {
    r.end = fs.frames.rows;
    r.clamped = true;
  }
  return r;
}

}  // namespace vgs
