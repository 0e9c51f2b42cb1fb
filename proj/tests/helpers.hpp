#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "imago/trace.hpp"

namespace testing {

inline imago::Trace trace(std::string id, double xi, std::vector<imago::FeatureEvent> events) {
  return imago::Trace(std::move(id), imago::MaliciousnessLevel(xi), std::move(events));
}

/// Random trace with each cell on with probability `density`.
inline imago::Trace random_trace(std::mt19937_64& rng, const std::string& id, imago::ImageShape shape,
                                 double density, double xi) {
  std::bernoulli_distribution on(density);
  std::vector<imago::FeatureEvent> ev;
  for (int f = 1; f <= shape.features; ++f) {
    for (int t = 1; t <= shape.horizon; ++t) {
      if (on(rng)) ev.push_back({f, t});
    }
  }
  return trace(id, xi, std::move(ev));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("imago-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace testing
