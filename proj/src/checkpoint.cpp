#include "dcnn/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dcnn/dtns.hpp"

namespace dcnn::nn {
namespace fs = std::filesystem;

Manifest parse_manifest(std::string_view text) {
  Manifest m;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string key;
    if (!(fields >> key)) continue;
    auto bad = [&](const std::string& why) {
      return FormatError("manifest line " + std::to_string(line_no) + ": " + why);
    };
    if (key == "precision") {
      if (!(fields >> m.precision) || (m.precision != 32 && m.precision != 64)) {
        throw bad("precision must be 32 or 64");
      }
    } else if (key == "arch") {
      if (!(fields >> m.arch_file)) throw bad("arch needs a file name");
    } else if (key == "attr") {
      std::string name, value;
      if (!(fields >> name)) throw bad("attr needs a key");
      std::getline(fields >> std::ws, value);
      m.attributes[name] = value;
    } else if (key == "tensor") {
      ManifestEntry e;
      if (!(fields >> e.layer >> e.kind >> e.name >> e.file)) {
        throw bad("tensor needs <layer> <kind> <name> <file>");
      }
      m.entries.push_back(std::move(e));
    } else {
      throw bad("unknown key '" + key + "'");
    }
  }
  return m;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_manifest(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string render_manifest(const Manifest& m) {
  std::ostringstream os;
  os << "# dcnn checkpoint manifest\n";
  os << "precision " << m.precision << "\n";
  if (!m.arch_file.empty()) os << "arch " << m.arch_file << "\n";
  for (const auto& [k, v] : m.attributes) os << "attr " << k << " " << v << "\n";
  for (const auto& e : m.entries) {
    os << "tensor " << e.layer << " " << e.kind << " " << e.name << " " << e.file << "\n";
  }
  return os.str();
}

int checkpoint_precision(const fs::path& dir) {
  return read_manifest(dir / kManifestName).precision;
}

namespace {

std::string tensor_file(std::size_t layer, std::string_view kind, std::string_view name) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "layer%03zu_", layer);
  return std::string(buf) + std::string(kind) + "_" + std::string(name) + ".dtns";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace

template <typename Real>
void save_checkpoint(const fs::path& dir, Network<Real>& net, const arch::ArchSpec& spec,
                     const std::map<std::string, std::string>& attributes) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  Manifest m;
  m.precision = sizeof(Real) == 4 ? 32 : 64;
  m.arch_file = "arch.cfg";
  m.attributes = attributes;
  write_text(dir / m.arch_file, arch::render_config(spec));
  for (std::size_t i = 0; i < net.size(); ++i) {
    Layer<Real>& layer = net.layer(i);
    const std::string kind(to_string(layer.kind()));
    for (auto* p : layer.parameters()) {
      const std::string file = tensor_file(i, kind, p->name);
      dtns::write_file(dir / file, p->value);
      m.entries.push_back({i, kind, p->name, file});
    }
    for (auto& [name, t] : layer.buffers()) {
      const std::string file = tensor_file(i, kind, name);
      dtns::write_file(dir / file, *t);
      m.entries.push_back({i, kind, name, file});
    }
  }
  write_text(dir / kManifestName, render_manifest(m));
}

template <typename Real>
LoadedCheckpoint<Real> load_checkpoint(const fs::path& dir, const BuildOptions& options) {
  Manifest m = read_manifest(dir / kManifestName);
  if (m.arch_file.empty()) throw FormatError(dir.string() + ": manifest names no arch file");
  arch::ArchSpec spec = arch::load_config(dir / m.arch_file);
  Network<Real> net = build_network<Real>(spec, options);
  for (const auto& e : m.entries) {
    if (e.layer >= net.size()) {
      throw FormatError("manifest refers to layer " + std::to_string(e.layer) +
                        " but the network has " + std::to_string(net.size()));
    }
    Layer<Real>& layer = net.layer(e.layer);
    if (to_string(layer.kind()) != e.kind) {
      throw FormatError("manifest layer " + std::to_string(e.layer) + " is '" + e.kind +
                        "' but the architecture builds '" +
                        std::string(to_string(layer.kind())) + "'");
    }
    BasicTensor<Real>* target = nullptr;
    for (auto* p : layer.parameters()) {
      if (p->name == e.name) target = &p->value;
    }
    for (auto& [name, t] : layer.buffers()) {
      if (name == e.name) target = t;
    }
    if (!target) {
      throw FormatError("layer " + std::to_string(e.layer) + " has no tensor '" + e.name + "'");
    }
    BasicTensor<Real> loaded = dtns::read_file<Real>(dir / e.file);
    if (loaded.shape() != target->shape()) {
      throw FormatError((dir / e.file).string() + ": shape " +
                        shape_to_string(loaded.shape()) + ", expected " +
                        shape_to_string(target->shape()));
    }
    *target = std::move(loaded);
  }
  net.set_mode(Mode::Eval);
  return {std::move(spec), std::move(m), std::move(net)};
}

template void save_checkpoint(const fs::path&, Network<float>&, const arch::ArchSpec&,
                              const std::map<std::string, std::string>&);
template void save_checkpoint(const fs::path&, Network<double>&, const arch::ArchSpec&,
                              const std::map<std::string, std::string>&);
template LoadedCheckpoint<float> load_checkpoint<float>(const fs::path&, const BuildOptions&);
template LoadedCheckpoint<double> load_checkpoint<double>(const fs::path&,
                                                          const BuildOptions&);

}  // namespace dcnn::nn
