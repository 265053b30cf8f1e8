#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dcnn/arch.hpp"
#include "dcnn/network.hpp"

namespace dcnn::nn {

/// manifest.txt of a checkpoint directory. Line format:
///   # comment
///   precision <32|64>
///   arch <file>
///   attr <key> <value...>
///   tensor <layer-index> <layer-kind> <name> <file>
/// Paths are relative to the manifest's directory.
struct ManifestEntry {
  std::size_t layer;
  std::string kind;
  std::string name;
  std::string file;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  int precision = 64;
  std::string arch_file;
  std::map<std::string, std::string> attributes;
  std::vector<ManifestEntry> entries;
};

inline constexpr const char* kManifestName = "manifest.txt";

Manifest parse_manifest(std::string_view text);
Manifest read_manifest(const std::filesystem::path& path);
std::string render_manifest(const Manifest& manifest);

/// Writes one DTNS file per parameter and running statistic, the resolved
/// architecture as arch.cfg, and manifest.txt.
template <typename Real>
void save_checkpoint(const std::filesystem::path& dir, Network<Real>& net,
                     const arch::ArchSpec& spec,
                     const std::map<std::string, std::string>& attributes = {});

/// Network rebuilt from the stored architecture with stored tensors loaded,
/// in evaluation mode.
template <typename Real>
struct LoadedCheckpoint {
  arch::ArchSpec spec;
  Manifest manifest;
  Network<Real> net;
};

template <typename Real>
LoadedCheckpoint<Real> load_checkpoint(const std::filesystem::path& dir,
                                       const BuildOptions& options = {});

/// Precision recorded in the manifest of `dir`.
int checkpoint_precision(const std::filesystem::path& dir);

}  // namespace dcnn::nn
