#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "nuer/corpus.hpp"
#include "nuer/rng.hpp"

namespace nuer::test {

// Unique scratch directory under the system temp root, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    dir_ = std::filesystem::temp_directory_path() /
           ("nuer_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

 private:
  std::filesystem::path dir_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Sentence make_sentence(const std::string& id, std::vector<std::string> tokens,
                              std::vector<EntityLabel> labels) {
  Sentence s;
  s.id = id;
  s.tokens = std::move(tokens);
  s.labels = std::move(labels);
  return s;
}

inline GenConfig small_gen_config(int n, uint64_t seed, bool questions = false,
                                  bool masks = false) {
  GenConfig cfg;
  cfg.n_sentences = n;
  cfg.seed = seed;
  cfg.with_questions = questions;
  cfg.with_masks = masks;
  for (EntityLabel e : entity_labels()) cfg.entity_mix[e] = 1.0;
  return cfg;
}

}  // namespace nuer::test
