#pragma once

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "refbert/corpus.hpp"
#include "refbert/error.hpp"
#include "refbert/synthetic.hpp"
#include "refbert/tokenizer.hpp"

#define EXPECT_THROW_CODE(stmt, errc)                                         \
  do {                                                                        \
    try {                                                                     \
      (void)(stmt);                                                           \
      ADD_FAILURE() << "expected " << refbert::to_string(errc) << " from " #stmt; \
    } catch (const refbert::Error& e_) {                                      \
      EXPECT_EQ(e_.code(), errc) << e_.what();                                \
    }                                                                         \
  } while (0)

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("refbert_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Adapted synthetic records and a BPE vocabulary trained on their code.
struct ToyCorpus {
  std::vector<refbert::corpus::RefactoringRecord> records;
  refbert::tok::SubwordVocab vocab;
};

inline ToyCorpus toy_corpus(std::size_t functions, std::uint64_t seed, std::size_t vocab_size = 600,
                            const refbert::synthetic::FunctionOptions& fn_options = {}, bool camel_split = false) {
  ToyCorpus c;
  c.records = refbert::corpus::adapt_corpus(refbert::synthetic::java_functions(functions, seed, fn_options), seed + 1);
  std::vector<std::string> texts;
  for (const auto& r : c.records) {
    texts.push_back(r.code_after);
    texts.push_back(r.code_before);
  }
  refbert::tok::BpeOptions opts;
  opts.camel_split = camel_split;
  c.vocab = refbert::tok::train_bpe(texts, vocab_size, opts);
  return c;
}
