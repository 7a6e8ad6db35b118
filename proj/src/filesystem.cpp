// SPDX-License-Identifier: Apache-2.0
#include <fnmatch.h>

#include <algorithm>
#include <set>

#include "preact/envs.hpp"
#include "preact/history.hpp"
#include "preact/text.hpp"

namespace preact {

namespace {

std::vector<std::string> split_args(std::string_view cmd) {
  std::vector<std::string> out;
  std::string cur;
  bool in_token = false;
  char quote = 0;
  for (char c : cmd) {
    if (quote) {
      if (c == quote) {
        quote = 0;
      } else {
        cur += c;
      }
    } else if (c == '\'' || c == '"') {
      quote = c;
      in_token = true;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      if (in_token) out.push_back(std::move(cur));
      cur.clear();
      in_token = false;
    } else {
      cur += c;
      in_token = true;
    }
  }
  if (in_token) out.push_back(std::move(cur));
  return out;
}

std::string normalize_path(std::string_view raw) {
  std::vector<std::string> parts;
  std::string cur;
  std::string p(raw);
  if (p.empty() || p.front() != '/') p = "/" + p;
  p += '/';
  for (char c : p) {
    if (c != '/') {
      cur += c;
      continue;
    }
    if (cur == "..") {
      if (!parts.empty()) parts.pop_back();
    } else if (!cur.empty() && cur != ".") {
      parts.push_back(cur);
    }
    cur.clear();
  }
  std::string out;
  for (const auto& part : parts) out += "/" + part;
  return out.empty() ? "/" : out;
}

std::string basename_of(const std::string& path) {
  auto slash = path.find_last_of('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

// Command output carries no trailing newline, so a final partial line counts.
std::size_t count_lines(std::string_view s) {
  auto n = static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
  return !s.empty() && s.back() != '\n' ? n + 1 : n;
}

class Shell {
 public:
  explicit Shell(const std::map<std::string, std::string>& files) : files_(files) {
    dirs_.insert("/");
    for (const auto& [path, _] : files_) {
      for (auto slash = path.find('/', 1); slash != std::string::npos; slash = path.find('/', slash + 1))
        dirs_.insert(path.substr(0, slash));
    }
  }

  bool is_file(const std::string& p) const { return files_.count(p) > 0; }
  bool is_dir(const std::string& p) const { return dirs_.count(p) > 0; }

  std::string run(const std::vector<std::string>& args, const std::string* stdin_text) const {
    const auto& cmd = args.front();
    if (cmd == "ls") return ls(args);
    if (cmd == "cat") return cat(args, stdin_text);
    if (cmd == "wc") return wc(args, stdin_text);
    if (cmd == "find") return find(args);
    if (cmd == "grep") return grep(args, stdin_text);
    if (cmd == "echo") {
      std::vector<std::string> rest(args.begin() + 1, args.end());
      return text::join(rest, " ");
    }
    if (cmd == "pwd") return "/";
    return "bash: " + cmd + ": command not found";
  }

 private:
  std::string ls(const std::vector<std::string>& args) const {
    std::vector<std::string> targets;
    for (std::size_t i = 1; i < args.size(); ++i)
      if (args[i].empty() || args[i][0] != '-') targets.push_back(args[i]);
    if (targets.empty()) targets.push_back("/");
    std::vector<std::string> chunks;
    for (const auto& t : targets) {
      auto p = normalize_path(t);
      if (is_file(p)) {
        chunks.push_back(t);
        continue;
      }
      if (!is_dir(p)) {
        chunks.push_back("ls: cannot access '" + t + "': No such file or directory");
        continue;
      }
      std::set<std::string> names;
      auto prefix = p == "/" ? std::string("/") : p + "/";
      auto collect = [&](const std::string& entry) {
        if (entry.size() > prefix.size() && entry.rfind(prefix, 0) == 0) {
          auto rest = entry.substr(prefix.size());
          names.insert(rest.substr(0, rest.find('/')));
        }
      };
      for (const auto& [f, _] : files_) collect(f);
      for (const auto& d : dirs_) collect(d);
      std::vector<std::string> listing(names.begin(), names.end());
      chunks.push_back(text::join(listing, "\n"));
    }
    return text::join(chunks, "\n");
  }

  std::string cat(const std::vector<std::string>& args, const std::string* stdin_text) const {
    if (args.size() < 2) return stdin_text ? *stdin_text : "";
    std::string out;
    for (std::size_t i = 1; i < args.size(); ++i) {
      auto p = normalize_path(args[i]);
      if (is_dir(p)) {
        out += "cat: " + args[i] + ": Is a directory\n";
      } else if (!is_file(p)) {
        out += "cat: " + args[i] + ": No such file or directory\n";
      } else {
        out += files_.at(p);
      }
    }
    return out;
  }

  std::string wc(const std::vector<std::string>& args, const std::string* stdin_text) const {
    if (args.size() < 2 || args[1] != "-l") return "wc: only 'wc -l' is supported";
    if (args.size() == 2) return std::to_string(stdin_text ? count_lines(*stdin_text) : 0);
    auto p = normalize_path(args[2]);
    if (!is_file(p)) return "wc: " + args[2] + ": No such file or directory";
    return std::to_string(count_lines(files_.at(p))) + " " + args[2];
  }

  std::string grep(const std::vector<std::string>& args, const std::string* stdin_text) const {
    if (args.size() < 2) return "Usage: grep PATTERN [FILE]";
    std::string body;
    if (args.size() >= 3) {
      auto p = normalize_path(args[2]);
      if (!is_file(p)) return "grep: " + args[2] + ": No such file or directory";
      body = files_.at(p);
    } else if (stdin_text) {
      body = *stdin_text;
    }
    std::vector<std::string> hits;
    for (auto line : text::split_lines(body))
      if (line.find(args[1]) != std::string_view::npos) hits.emplace_back(line);
    return text::join(hits, "\n");
  }

  std::string find(const std::vector<std::string>& args) const {
    std::string root = "/";
    std::string pattern = "*";
    for (std::size_t i = 1; i < args.size(); ++i) {
      if (args[i] == "-name" && i + 1 < args.size()) {
        pattern = args[++i];
      } else if (args[i] == "-type" && i + 1 < args.size()) {
        ++i;
      } else if (i == 1 && args.size() == 2 && args[i].find('*') != std::string::npos) {
        pattern = args[i];
      } else if (!args[i].empty() && args[i][0] != '-') {
        root = args[i];
      }
    }
    auto base = normalize_path(root);
    if (!is_dir(base) && !is_file(base)) return "find: '" + root + "': No such file or directory";
    std::set<std::string> hits;
    auto consider = [&](const std::string& path) {
      bool under = path == base || base == "/" || path.rfind(base + "/", 0) == 0;
      if (under && fnmatch(pattern.c_str(), basename_of(path).c_str(), 0) == 0) hits.insert(path);
    };
    for (const auto& [f, _] : files_) consider(f);
    for (const auto& d : dirs_)
      if (d != "/") consider(d);
    std::vector<std::string> out(hits.begin(), hits.end());
    return text::join(out, "\n");
  }

  const std::map<std::string, std::string>& files_;
  std::set<std::string> dirs_;
};

std::string strip_quotes(std::string_view s) {
  s = text::trim(s);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
    s = s.substr(1, s.size() - 2);
  return std::string(text::trim(s));
}

}  // namespace

FileSystemEnv::FileSystemEnv(const TaskSpec& spec)
    : Environment(spec), world_(std::get<FileSystemWorld>(spec.world)) {}

std::string FileSystemEnv::do_reset(std::uint64_t) {
  solved_ = false;
  return world_.question;
}

std::string FileSystemEnv::run(std::string_view command) const {
  Shell shell(world_.files);
  std::string carried;
  bool have_input = false;
  std::size_t start = 0;
  std::string cmd(command);
  // Pipelines of up to a few stages; each stage sees the previous output.
  while (true) {
    auto bar = cmd.find('|', start);
    auto stage = std::string_view(cmd).substr(start, bar == std::string::npos ? std::string::npos : bar - start);
    auto args = split_args(stage);
    if (args.empty()) return "bash: syntax error near unexpected token `|'";
    carried = shell.run(args, have_input ? &carried : nullptr);
    have_input = true;
    if (bar == std::string::npos) break;
    start = bar + 1;
  }
  return carried;
}

EnvOutcome FileSystemEnv::do_step(std::string_view action) {
  auto a = text::trim(action);
  if (text::istarts_with(a, "answer(")) {
    auto body = a.substr(7);
    auto close = body.rfind(')');
    if (close != std::string_view::npos) body = body.substr(0, close);
    solved_ = strip_quotes(body) == text::trim(world_.answer);
    return {solved_ ? "Your answer is submitted." : "Your answer is submitted.", true, solved_ ? 1.0 : 0.0};
  }
  if (text::iequals(a, "finish")) return {"Task finished.", true, 0.0};
  std::string out;
  for (auto line : text::split_lines(a)) {
    line = text::trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (!out.empty()) out += "\n";
    out += run(line);
  }
  return {truncate_observation(out), false, 0.0};
}

}  // namespace preact
