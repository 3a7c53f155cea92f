#pragma once

// Flat-file output: CSV tables and a per-run file manifest.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdkin {

/// Fixed 12-significant-digit rendering so outputs compare byte for byte.
inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    columns_ = header.size();
    write_fields(header);
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> fields;
    fields.reserve(values.size());
    for (double v : values) fields.push_back(format_number(v));
    write_fields(fields);
  }

  /// Row with leading text fields followed by numbers.
  void row(const std::vector<std::string>& labels, const std::vector<double>& values) {
    std::vector<std::string> fields = labels;
    for (double v : values) fields.push_back(format_number(v));
    write_fields(fields);
  }

 private:
  void write_fields(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) throw std::logic_error("CsvWriter: row width does not match header");
    for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
    out_ << '\n';
    if (!out_) throw std::runtime_error("CsvWriter: write failed");
  }

  std::ofstream out_;
  std::size_t columns_ = 0;
};

/// An output directory that remembers every file handed out.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  [[nodiscard]] std::filesystem::path claim(const std::string& file) {
    for (const auto& f : files_)
      if (f == file) throw std::logic_error("OutputDir: file '" + file + "' claimed twice");
    files_.push_back(file);
    return dir_ / file;
  }

  CsvWriter csv(const std::string& file, const std::vector<std::string>& header) {
    return CsvWriter(claim(file), header);
  }

  [[nodiscard]] const std::vector<std::string>& files() const noexcept { return files_; }
  [[nodiscard]] const std::filesystem::path& path() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

}  // namespace mdkin
