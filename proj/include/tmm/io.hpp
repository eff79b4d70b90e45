#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "tmm/types.hpp"

namespace tmm {

// FNV-1a 64-bit hash, used to stamp artifacts with the manifest they came from.
std::uint64_t fnv1a64(const std::string& text);
std::string fnv1a64_hex(const std::string& text);

// Little-endian binary primitives (files are byte-identical across runs).
void write_u64(std::FILE* f, std::uint64_t v);
void write_i64(std::FILE* f, std::int64_t v);
void write_f64(std::FILE* f, double v);
std::uint64_t read_u64(std::FILE* f);
std::int64_t read_i64(std::FILE* f);
double read_f64(std::FILE* f);
void write_bytes(std::FILE* f, const void* p, std::size_t count);
void read_bytes(std::FILE* f, void* p, std::size_t count);

// %.17g rendering — shortest round-trip-safe decimal for a double.
std::string format_g17(double v);

// Columnar text artifact:
//   line 1: "# manifest <fnv64hex>"
//   line 2: comma-separated column names
//   then one comma-separated row per record, doubles at 17 significant digits.
class ColumnarWriter {
 public:
  ColumnarWriter(const std::string& path, const std::string& manifest_hash,
                 const std::vector<std::string>& columns);
  ~ColumnarWriter();
  ColumnarWriter(const ColumnarWriter&) = delete;
  ColumnarWriter& operator=(const ColumnarWriter&) = delete;

  void field(double v);
  void field(std::int64_t v);
  void field(const std::string& v);
  void end_row();

 private:
  std::FILE* f_ = nullptr;
  std::size_t n_cols_ = 0;
  std::size_t col_ = 0;
  std::string path_;
};

// Whole-file convenience used by tests and the CLI.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace tmm
