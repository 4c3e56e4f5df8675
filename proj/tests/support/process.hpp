#pragma once

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace spsn::testing {

struct ProcessResult {
  int exit_code = -1;
  std::string out;  // standard output only
};

inline std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

/// Runs `program args...` through the shell; standard error goes to `err_log`.
inline ProcessResult run_process(const std::string& program, const std::vector<std::string>& args,
                                 const std::string& err_log = "/dev/null") {
  std::string cmd = shell_quote(program);
  for (const auto& a : args) cmd += " " + shell_quote(a);
  cmd += " 2>>" + shell_quote(err_log);
  ProcessResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  for (std::size_t n; (n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0;) r.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// CSV text with one named column removed from every row.
inline std::string drop_column(const std::string& csv, const std::string& name) {
  std::vector<std::vector<std::string>> rows;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    auto end = csv.find('\n', pos);
    if (end == std::string::npos) end = csv.size();
    std::vector<std::string> cells;
    std::string line = csv.substr(pos, end - pos);
    std::size_t c = 0;
    while (true) {
      auto comma = line.find(',', c);
      cells.push_back(line.substr(c, comma == std::string::npos ? std::string::npos : comma - c));
      if (comma == std::string::npos) break;
      c = comma + 1;
    }
    rows.push_back(std::move(cells));
    pos = end + 1;
  }
  std::size_t drop = std::string::npos;
  if (!rows.empty()) {
    for (std::size_t i = 0; i < rows[0].size(); ++i)
      if (rows[0][i] == name) drop = i;
  }
  std::string out;
  for (const auto& row : rows) {
    bool first = true;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i == drop) continue;
      if (!first) out += ',';
      out += row[i];
      first = false;
    }
    out += '\n';
  }
  return out;
}

}  // namespace spsn::testing
