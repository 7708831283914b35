#include "vgs/io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vgs {

namespace {

constexpr char kFeatMagic[8] = {'V', 'G', 'S', 'F', 'E', 'A', 'T', '1'};
constexpr std::uint32_t kFeatVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error(std::string("feature file: truncated ") + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double x) {
  std::uint64_t v = std::bit_cast<std::uint64_t>(x);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is, const char* what) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error(std::string("feature file: truncated ") + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

void check_cell(const std::string& cell, char sep) {
  for (char c : cell)
    if (c == sep || c == '"' || c == '\n' || c == '\r')
      throw std::invalid_argument("delimited write: cell contains separator, quote or line break: " +
                                  cell);
}

}  // namespace

void save_features(const std::filesystem::path& path, const FeatureSequence& seq) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("feature file: cannot open for writing: " + path.string());
  os.write(kFeatMagic, sizeof(kFeatMagic));
  put_u32(os, kFeatVersion);
  put_u32(os, static_cast<std::uint32_t>(seq.utterance_id.size()));
  os.write(seq.utterance_id.data(), static_cast<std::streamsize>(seq.utterance_id.size()));
  put_f64(os, seq.window_s);
  put_f64(os, seq.shift_s);
  put_u32(os, static_cast<std::uint32_t>(seq.frames.rows));
  put_u32(os, static_cast<std::uint32_t>(seq.frames.cols));
  for (double x : seq.frames.v) put_f64(os, x);
  if (!os) throw std::runtime_error("feature file: write failed: " + path.string());
}

FeatureSequence load_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("feature file: cannot open: " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::string(magic, 8) != std::string(kFeatMagic, 8))
    throw std::runtime_error("feature file: bad magic in " + path.string());
  if (get_u32(is, "version") != kFeatVersion)
    throw std::runtime_error("feature file: unsupported version in " + path.string());

  FeatureSequence seq;
  std::uint32_t id_len = get_u32(is, "id length");
  seq.utterance_id.resize(id_len);
  is.read(seq.utterance_id.data(), static_cast<std::streamsize>(id_len));
  if (!is) throw std::runtime_error("feature file: truncated id in " + path.string());
  seq.window_s = get_f64(is, "window");
  seq.shift_s = get_f64(is, "shift");
  std::uint32_t rows = get_u32(is, "row count");
  std::uint32_t cols = get_u32(is, "column count");
  seq.frames = Matrix(static_cast<int>(rows), static_cast<int>(cols));
  for (double& x : seq.frames.v) x = get_f64(is, "frame data");
  return seq;
}

void save_image_vector(const std::filesystem::path& path, const std::string& id,
                       const std::vector<double>& v) {
  FeatureSequence seq;
  seq.utterance_id = id;
  seq.window_s = 0.0;
  seq.shift_s = 0.0;
  seq.frames = Matrix(1, static_cast<int>(v.size()));
  std::copy(v.begin(), v.end(), seq.frames.v.begin());
  save_features(path, seq);
}

std::vector<double> load_image_vector(const std::filesystem::path& path) {
  FeatureSequence seq = load_features(path);
  if (seq.frames.rows != 1)
    throw std::runtime_error("image vector file: expected one row, got " +
                             std::to_string(seq.frames.rows) + " in " + path.string());
  return seq.frames.v;
}

std::vector<ManifestEntry> parse_manifest(const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows = read_delimited(path, '\t');
  if (rows.empty() || rows[0] != std::vector<std::string>{"id", "split", "caption", "image"})
    throw std::runtime_error("manifest: missing or malformed header in " + path.string());
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 4)
      throw std::runtime_error("manifest: line " + std::to_string(i + 1) + " has " +
                               std::to_string(rows[i].size()) + " fields, expected 4");
    ManifestEntry e{rows[i][0], rows[i][1], rows[i][2], rows[i][3]};
    if (e.split != "train" && e.split != "dev" && e.split != "test")
      throw std::runtime_error("manifest: line " + std::to_string(i + 1) + " has unknown split " +
                               e.split);
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(entries.size());
  for (const ManifestEntry& e : entries) rows.push_back({e.id, e.split, e.caption_path, e.image_path});
  write_delimited(path, '\t', {"id", "split", "caption", "image"}, rows);
}

std::vector<TrainPair> load_pairs(const std::filesystem::path& manifest_path,
                                  const std::string& split) {
  std::filesystem::path base = manifest_path.parent_path();
  std::vector<TrainPair> pairs;
  for (const ManifestEntry& e : parse_manifest(manifest_path)) {
    if (!split.empty() && e.split != split) continue;
    TrainPair p;
    p.caption = load_features(base / e.caption_path);
    p.image = load_image_vector(base / e.image_path);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void write_delimited(const std::filesystem::path& path, char sep,
                     const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows) {
  std::ofstream os(path, std::ios::binary);  // binary keeps line endings identical everywhere
  if (!os) throw std::runtime_error("delimited write: cannot open " + path.string());
  auto write_row = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      check_cell(row[i], sep);
      if (i > 0) os << sep;
      os << row[i];
    }
    os << '\n';
  };
  write_row(header);
  for (const std::vector<std::string>& row : rows) {
    if (row.size() != header.size())
      throw std::invalid_argument("delimited write: row width " + std::to_string(row.size()) +
                                  " does not match header width " + std::to_string(header.size()));
    write_row(row);
  }
  if (!os) throw std::runtime_error("delimited write: write failed: " + path.string());
}

std::vector<std::vector<std::string>> read_delimited(const std::filesystem::path& path, char sep) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("delimited read: cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_on(line, sep));
  }
  return rows;
}

std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("text read: cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("text write: cannot open " + path.string());
  os << content;
  if (!os) throw std::runtime_error("text write: write failed: " + path.string());
}

}  // namespace vgs
