#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vgs/audio.hpp"
#include "vgs/trainer.hpp"

namespace vgs {

// Versioned binary feature cache, one sequence per file; values round-trip
// bit-exactly.
void save_features(const std::filesystem::path& path, const FeatureSequence& seq);
FeatureSequence load_features(const std::filesystem::path& path);

// Image descriptors ride the same container as a single-frame sequence.
void save_image_vector(const std::filesystem::path& path, const std::string& id,
                       const std::vector<double>& v);
std::vector<double> load_image_vector(const std::filesystem::path& path);

struct ManifestEntry {
  std::string id;
  std::string split;  // train | dev | test
  std::string caption_path;  // relative to the manifest's directory
  std::string image_path;
};

// Tab-separated with a fixed header: id, split, caption, image.
std::vector<ManifestEntry> parse_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries);

// Loads every manifest entry of one split into memory, resolving paths
// against the manifest's directory. An empty split selects everything.
std::vector<TrainPair> load_pairs(const std::filesystem::path& manifest_path,
                                  const std::string& split);

// Delimited text with a header row. Numbers should be rendered through
// format_double so equal values always serialize to equal bytes. Cells must
// not contain the separator, quotes or line breaks; offenders throw.
void write_delimited(const std::filesystem::path& path, char sep,
                     const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows);

// All rows of a delimited file, header included.
std::vector<std::vector<std::string>> read_delimited(const std::filesystem::path& path, char sep);

std::vector<std::string> split_on(const std::string& line, char sep);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace vgs
