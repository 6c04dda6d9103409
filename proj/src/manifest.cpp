#include "descdist/manifest.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "descdist/errors.hpp"
#include "descdist/hash.hpp"

namespace descdist {

void RunManifest::write(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json j;
  j["tool_version"] = kToolVersion;
  j["command"] = command;
  j["argv"] = argv;
  j["config"] = config_json.empty() ? nlohmann::json::object()
                                    : nlohmann::json::parse(config_json);
  j["inputs"] = nlohmann::json::array();
  for (const auto& p : input_paths) {
    nlohmann::json e;
    e["path"] = p;
    if (fs::is_regular_file(p)) {
      e["fnv1a64"] = hex64(fnv1a64_file(p));
      e["bytes"] = static_cast<std::uint64_t>(fs::file_size(p));
    } else if (fs::is_directory(p)) {
      // hash directory contents in sorted order so the digest is stable
      std::vector<std::string> files;
      for (const auto& f : fs::recursive_directory_iterator(p))
        if (f.is_regular_file()) files.push_back(f.path().string());
      std::sort(files.begin(), files.end());
      std::uint64_t h = kFnvOffset;
      for (const auto& f : files) {
        h = fnv1a64(f.data(), f.size(), h);
        const std::uint64_t fh = fnv1a64_file(f);
        h = fnv1a64(&fh, sizeof(fh), h);
      }
      e["fnv1a64"] = hex64(h);
      e["files"] = files.size();
    }
    j["inputs"].push_back(e);
  }
  j["outputs"] = output_paths;
  std::ofstream out((fs::path(dir) / "manifest.json").string());
  require<Error>(out.good(), "cannot write manifest in " + dir);
  out << j.dump(2) << "\n";
  require<Error>(out.good(), "manifest write failed in " + dir);
}

}  // namespace descdist
