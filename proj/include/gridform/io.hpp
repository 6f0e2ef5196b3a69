#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Deterministic formatting and artifact plumbing.  All result files written by
// this project must be byte-identical across reruns and across worker counts,
// so every number goes through one fixed formatter and no artifact ever embeds
// a timestamp, hostname, or iteration-order-dependent field.

namespace gridform::io {

// FNV-1a 64-bit over raw bytes; used to fingerprint case files inside artifacts.
std::uint64_t fnv1a64(std::string_view bytes);

// Fixed-width hex rendering of a hash (16 lowercase digits).
std::string hex64(std::uint64_t h);

// Canonical number rendering: printf "%.12g".  Shared by every CSV/JSON writer.
std::string fmt(double x);

// "a+bj" / "a-bj" with both parts through fmt(); used in CSV mode columns.
std::string fmt_complex(double re, double im);

// Comment header stamped on top of CSV artifacts:
//   # gridform-ssa <version>
//   # case-sha <fnv1a64 of the case file bytes>
//   # config <single-line JSON echo of the run configuration>
std::string artifact_header(std::string_view case_hash_hex,
                            std::string_view config_json_line);

// Reads a whole file; throws ValidationError naming the path when unreadable.
std::string read_file(const std::string& path);

// Writes bytes exactly (binary mode); throws ValidationError on failure.
void write_file(const std::string& path, std::string_view bytes);

// Joins CSV cells with commas and a trailing '\n'.
std::string csv_row(const std::vector<std::string>& cells);

}  // namespace gridform::io
