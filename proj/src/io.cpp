#include "gridform/io.hpp"

#include "gridform/types.hpp"
#include "gridform/version.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gridform::io {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt(double x) {
  // Normalize the one value with two bit patterns so artifacts cannot differ
  // by a stray minus sign on zero.
  if (x == 0.0) x = 0.0;
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

std::string fmt_complex(double re, double im) {
  std::string s = fmt(re);
  s += (im < 0.0) ? "-" : "+";
  s += fmt(im < 0.0 ? -im : im);
  s += "j";
  return s;
}

std::string artifact_header(std::string_view case_hash_hex,
                            std::string_view config_json_line) {
  std::string h;
  h += "# gridform-ssa ";
  h += kVersion;
  h += "\n# case-sha ";
  h += case_hash_hex;
  h += "\n# config ";
  h += config_json_line;
  h += "\n";
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write file: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("short write on file: " + path);
}

std::string csv_row(const std::vector<std::string>& cells) {
  std::string row;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) row += ',';
    row += cells[i];
  }
  row += '\n';
  return row;
}

}  // namespace gridform::io
