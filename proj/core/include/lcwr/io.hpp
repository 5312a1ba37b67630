#pragma once

// On-disk formats.
//
// Annotations: one JSON object per line,
//   {"instruction_id": str, "model_id": str, "baseline_id": str,
//    "len_model": int, "len_baseline": int, "preference": number}
//
// Gamma file and fit archive: a single JSON document tagged with
// kSchemaVersion. Doubles are written in shortest round-trip form, so every
// value reloads bit-exactly.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lcwr/estimation.hpp"
#include "lcwr/glm.hpp"

namespace lcwr {

inline constexpr const char* kSchemaVersion = "lcwr-1";

struct FitArchive {
  std::string version = kSchemaVersion;
  GammaTable gamma;
  std::vector<ModelFit> fits;
  FitConfig config;
};

// Throws DataError (with the 1-based line number) on any invalid line. Blank
// lines are skipped.
std::vector<AnnotationRecord> read_annotations(std::istream& in);
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);

void write_annotations(std::ostream& out, std::span<const AnnotationRecord> records);
void save_annotations(const std::filesystem::path& path, std::span<const AnnotationRecord> records);

void write_gamma(std::ostream& out, const GammaTable& gamma);
GammaTable read_gamma(std::istream& in);
void save_gamma(const std::filesystem::path& path, const GammaTable& gamma);
GammaTable load_gamma(const std::filesystem::path& path);

void write_archive(std::ostream& out, const FitArchive& archive);
FitArchive read_archive(std::istream& in);
void save_archive(const std::filesystem::path& path, const FitArchive& archive);
FitArchive load_archive(const std::filesystem::path& path);

}  // namespace lcwr
