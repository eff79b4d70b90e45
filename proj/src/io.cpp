#include "tmm/io.hpp"

#include <cinttypes>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tmm {

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a64_hex(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a64(text));
  return std::string(buf);
}

void write_u64(std::FILE* f, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  write_bytes(f, b, 8);
}

void write_i64(std::FILE* f, std::int64_t v) {
  write_u64(f, static_cast<std::uint64_t>(v));
}

void write_f64(std::FILE* f, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(f, bits);
}

std::uint64_t read_u64(std::FILE* f) {
  unsigned char b[8];
  read_bytes(f, b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::int64_t read_i64(std::FILE* f) { return static_cast<std::int64_t>(read_u64(f)); }

double read_f64(std::FILE* f) {
  std::uint64_t bits = read_u64(f);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void write_bytes(std::FILE* f, const void* p, std::size_t count) {
  if (std::fwrite(p, 1, count, f) != count) throw IoError("short write");
}

void read_bytes(std::FILE* f, void* p, std::size_t count) {
  if (std::fread(p, 1, count, f) != count) throw IoError("short read / truncated file");
}

std::string format_g17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

ColumnarWriter::ColumnarWriter(const std::string& path, const std::string& manifest_hash,
                               const std::vector<std::string>& columns)
    : n_cols_(columns.size()), path_(path) {
  f_ = std::fopen(path.c_str(), "wb");
  if (!f_) throw IoError("cannot open for writing: " + path);
  std::string head = "# manifest " + manifest_hash + "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    head += columns[i];
    head += (i + 1 == columns.size()) ? '\n' : ',';
  }
  write_bytes(f_, head.data(), head.size());
}

ColumnarWriter::~ColumnarWriter() {
  if (f_) std::fclose(f_);
}

void ColumnarWriter::field(double v) { field(format_g17(v)); }

void ColumnarWriter::field(std::int64_t v) { field(std::to_string(v)); }

void ColumnarWriter::field(const std::string& v) {
  std::string s;
  if (col_ > 0) s += ',';
  s += v;
  write_bytes(f_, s.data(), s.size());
  ++col_;
}

void ColumnarWriter::end_row() {
  if (col_ != n_cols_) throw IoError("row has wrong arity in " + path_);
  write_bytes(f_, "\n", 1);
  col_ = 0;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("short write: " + path);
}

}  // namespace tmm
