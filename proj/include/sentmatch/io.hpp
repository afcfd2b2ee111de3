// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sentmatch {

/// Line reader over plain or gzip-compressed text (zlib reads both).
class LineReader {
 public:
  explicit LineReader(const std::string &path) : path_(path) {
    file_ = gzopen(path.c_str(), "rb");
    if (!file_) throw std::runtime_error("cannot open " + path);
  }
  LineReader(const LineReader &) = delete;
  LineReader &operator=(const LineReader &) = delete;
  ~LineReader() {
    if (file_) gzclose(file_);
  }

  /// Next line without the trailing newline (and CR); false at end of input.
  bool next(std::string &line) {
    line.clear();
    char buf[8192];
    bool any = false;
    while (gzgets(file_, buf, sizeof buf)) {
      any = true;
      std::string_view chunk(buf);
      if (!chunk.empty() && chunk.back() == '\n') {
        chunk.remove_suffix(1);
        line.append(chunk);
        break;
      }
      line.append(chunk);
    }
    if (!any) {
      int err = 0;
      const char *msg = gzerror(file_, &err);
      if (err != Z_OK && err != Z_STREAM_END) throw std::runtime_error("read error in " + path_ + ": " + msg);
      return false;
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no_;
    return true;
  }

  std::size_t line_number() const { return line_no_; }

 private:
  std::string path_;
  gzFile file_ = nullptr;
  std::size_t line_no_ = 0;
};

inline std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(text.substr(start));
      return out;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

/// Writes via a sibling temporary file and renames over the target, so a
/// failed write never leaves a partial file behind.
template <class Writer>
void write_atomically(const std::filesystem::path &target, Writer &&writer) {
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    try {
      writer(out);
      out.flush();
      if (!out) throw std::runtime_error("write failed for " + tmp.string());
    } catch (...) {
      out.close();
      std::filesystem::remove(tmp);
      throw;
    }
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace sentmatch
