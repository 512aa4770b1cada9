#include "microdyn/host.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"

#include "microdyn/numeric.hpp"
#include "microdyn/runtime_text.hpp"

extern char** environ;

namespace microdyn {

HostError::HostError(HostErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

namespace {

[[noreturn]] void raise(HostErrorKind kind, const std::string& message) { throw HostError(kind, message); }

void putU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

// ---- wire -----------------------------------------------------------------

namespace wire {

std::vector<std::uint8_t> encode(const Message& m) {
  std::vector<std::uint8_t> out{static_cast<std::uint8_t>(m.opcode)};
  switch (m.opcode) {
    case Opcode::Exit:
      putU32(out, static_cast<std::uint32_t>(m.status));
      break;
    case Opcode::Mark:
      putU32(out, static_cast<std::uint32_t>(m.text.size()));
      out.insert(out.end(), m.text.begin(), m.text.end());
      for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(m.nanos >> (8 * i)));
      break;
    case Opcode::Load:
    case Opcode::Output:
      putU32(out, static_cast<std::uint32_t>(m.text.size()));
      out.insert(out.end(), m.text.begin(), m.text.end());
      break;
  }
  return out;
}

std::vector<std::uint8_t> encodeLoadReply(std::uint8_t status, std::span<const std::uint8_t> code) {
  std::vector<std::uint8_t> out{status};
  putU32(out, static_cast<std::uint32_t>(code.size()));
  out.insert(out.end(), code.begin(), code.end());
  return out;
}

void Decoder::feed(std::span<const std::uint8_t> bytes) { buffer_.insert(buffer_.end(), bytes.begin(), bytes.end()); }

std::optional<Message> Decoder::next() {
  if (buffer_.size() < 5) {
    if (!buffer_.empty() && (buffer_[0] < 0x01 || buffer_[0] > 0x04))
      raise(HostErrorKind::Channel, "unknown opcode " + std::to_string(buffer_[0]));
    return std::nullopt;
  }
  std::uint32_t word = 0;
  for (int i = 3; i >= 0; --i) word = (word << 8) | buffer_[static_cast<std::size_t>(1 + i)];
  Message m;
  std::size_t total = 5;
  switch (buffer_[0]) {
    case 0x01:
    case 0x02:
    case 0x04: {
      const std::uint32_t limit = buffer_[0] == 0x02 ? kMaxOutput : kMaxName;
      if (word > limit) raise(HostErrorKind::Channel, "frame length " + std::to_string(word) + " exceeds limit");
      total += word + (buffer_[0] == 0x04 ? 8u : 0u);
      if (buffer_.size() < total) return std::nullopt;
      m.opcode = static_cast<Opcode>(buffer_[0]);
      m.text.assign(buffer_.begin() + 5, buffer_.begin() + 5 + word);
      if (m.opcode == Opcode::Load && m.text.empty()) raise(HostErrorKind::Channel, "empty LOAD name");
      if (m.opcode == Opcode::Mark)
        for (int i = 7; i >= 0; --i) m.nanos = (m.nanos << 8) | buffer_[5 + word + static_cast<std::size_t>(i)];
      break;
    }
    case 0x03:
      m.opcode = Opcode::Exit;
      m.status = static_cast<std::int32_t>(word);
      break;
    default:
      raise(HostErrorKind::Channel, "unknown opcode " + std::to_string(buffer_[0]));
  }
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(total));
  return m;
}

}  // namespace wire

// ---- toolchain ------------------------------------------------------------

namespace {

std::vector<std::string> splitWords(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

}  // namespace

ToolchainProfile ToolchainProfile::fromJson(const std::string& text, ToolchainProfile base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(HostErrorKind::Config, std::string("toolchain config: ") + e.what());
  }
  if (!j.is_object()) raise(HostErrorKind::Config, "toolchain config must be a JSON object");
  auto words = [&](const char* key, std::vector<std::string>& into) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (v.is_string()) {
      into = splitWords(v.get<std::string>());
    } else if (v.is_array() && std::all_of(v.begin(), v.end(), [](const auto& e) { return e.is_string(); })) {
      into = v.get<std::vector<std::string>>();
    } else {
      raise(HostErrorKind::Config, std::string("toolchain config: ") + key + " must be a string or string list");
    }
  };
  words("compiler", base.compiler);
  words("resident_flags", base.residentFlags);
  words("dynamic_flags", base.dynamicFlags);
  words("link_flags", base.linkFlags);
  if (j.contains("machine")) {
    if (!j.at("machine").is_number_unsigned() || j.at("machine").get<std::uint64_t>() > 0xffff)
      raise(HostErrorKind::Config, "toolchain config: machine must be a 16-bit tag");
    base.machine = j.at("machine").get<std::uint16_t>();
  }
  if (base.compiler.empty()) raise(HostErrorKind::Config, "toolchain config: empty compiler command");
  return base;
}

ToolchainProfile ToolchainProfile::fromJson(const std::string& text) { return fromJson(text, ToolchainProfile{}); }

ToolchainProfile ToolchainProfile::fromEnvironment() {
  ToolchainProfile profile;
  if (const char* path = std::getenv("MICRODYN_TOOLCHAIN"); path && *path) {
    std::ifstream in(path);
    if (!in) raise(HostErrorKind::Config, std::string("cannot read toolchain config ") + path);
    std::ostringstream text;
    text << in.rdbuf();
    profile = fromJson(text.str(), profile);
  }
  if (const char* cc = std::getenv("MICRODYN_CC"); cc && *cc) {
    profile.compiler = splitWords(cc);
    if (profile.compiler.empty()) raise(HostErrorKind::Config, "MICRODYN_CC is blank");
  }
  return profile;
}

// ---- processes ------------------------------------------------------------

namespace {

struct FdGuard {
  int fd = -1;
  FdGuard() = default;
  explicit FdGuard(int f) : fd(f) {}
  FdGuard(const FdGuard&) = delete;
  FdGuard& operator=(const FdGuard&) = delete;
  ~FdGuard() { reset(); }
  void reset() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

struct SpawnPlan {
  std::vector<std::string> argv;
  std::map<std::string, std::string> extraEnv;
  /// child fd -> parent fd to duplicate into it
  std::vector<std::pair<int, int>> dups;
};

pid_t spawn(const SpawnPlan& plan) {
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  for (auto [child, parent] : plan.dups) posix_spawn_file_actions_adddup2(&actions, parent, child);

  std::vector<std::string> envStrings;
  for (char** e = environ; *e; ++e) {
    std::string entry(*e);
    const std::string key = entry.substr(0, entry.find('='));
    if (!plan.extraEnv.count(key)) envStrings.push_back(std::move(entry));
  }
  for (const auto& [k, v] : plan.extraEnv) envStrings.push_back(k + "=" + v);
  std::vector<char*> envp;
  for (auto& s : envStrings) envp.push_back(s.data());
  envp.push_back(nullptr);
  std::vector<std::string> args = plan.argv;
  std::vector<char*> argv;
  for (auto& s : args) argv.push_back(s.data());
  argv.push_back(nullptr);

  pid_t pid = -1;
  const int rc = posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), envp.data());
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) raise(HostErrorKind::Process, "cannot start " + plan.argv[0] + ": " + std::strerror(rc));
  return pid;
}

/// Parent-side descriptors are close-on-exec and numbered above the standard
/// streams so that dup2 into the child always clears the flag.
int highFd(int fd) {
  const int high = ::fcntl(fd, F_DUPFD_CLOEXEC, 10);
  ::close(fd);
  if (high < 0) raise(HostErrorKind::Process, std::string("fcntl: ") + std::strerror(errno));
  return high;
}

void makePipe(FdGuard& readEnd, FdGuard& writeEnd) {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) raise(HostErrorKind::Process, std::string("pipe: ") + std::strerror(errno));
  readEnd.fd = highFd(fds[0]);
  writeEnd.fd = highFd(fds[1]);
}

int waitStatus(pid_t pid) {
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0)
    if (errno != EINTR) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

bool drain(int fd, std::string& into) {
  char buf[65536];
  const ssize_t n = ::read(fd, buf, sizeof buf);
  if (n > 0) {
    into.append(buf, static_cast<std::size_t>(n));
    return true;
  }
  return n < 0 && (errno == EINTR || errno == EAGAIN);
}

void writeAll(int fd, const std::vector<std::uint8_t>& bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) raise(HostErrorKind::Channel, std::string("channel write failed: ") + std::strerror(errno));
    done += static_cast<std::size_t>(n);
  }
}

}  // namespace

CommandResult runCommand(const std::vector<std::string>& argv) {
  FdGuard readEnd, writeEnd;
  makePipe(readEnd, writeEnd);
  SpawnPlan plan;
  plan.argv = argv;
  plan.dups = {{1, writeEnd.fd}, {2, writeEnd.fd}};
  const pid_t pid = spawn(plan);
  writeEnd.reset();
  CommandResult result;
  while (drain(readEnd.fd, result.output)) {
  }
  result.status = waitStatus(pid);
  return result;
}

// ---- build ----------------------------------------------------------------

namespace {

void writeText(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) raise(HostErrorKind::Toolchain, "cannot write " + path.string());
}

void invoke(const std::vector<std::string>& argv, const std::string& what) {
  CommandResult r;
  try {
    r = runCommand(argv);
  } catch (const HostError& e) {
    raise(HostErrorKind::Toolchain, what + ": " + e.what());
  }
  if (r.status != 0) {
    std::string cmd;
    for (const auto& a : argv) cmd += (cmd.empty() ? "" : " ") + a;
    raise(HostErrorKind::Toolchain, what + " failed (status " + std::to_string(r.status) + ")\n$ " + cmd + "\n" +
                                        r.output);
  }
}

std::vector<std::string> compileCommand(const ToolchainProfile& p, const std::vector<std::string>& flags,
                                        const std::filesystem::path& includeDir, const std::filesystem::path& source,
                                        const std::filesystem::path& object) {
  std::vector<std::string> cmd = p.compiler;
  cmd.insert(cmd.end(), flags.begin(), flags.end());
  cmd.insert(cmd.end(), {"-I" + includeDir.string(), "-c", source.string(), "-o", object.string()});
  return cmd;
}

std::filesystem::path runtimeObject(const ToolchainProfile& profile, const std::filesystem::path& dir,
                                    const BuildOptions& options) {
  std::string key;
  for (const auto& w : profile.compiler) key += w + '\x1f';
  for (const auto& w : profile.residentFlags) key += w + '\x1f';
  key += runtimeHeaderText();
  key += runtimeSourceText();
  std::ostringstream name;
  name << "oly_rt_" << std::hex << std::hash<std::string>{}(key) << ".o";

  const bool shared = !options.runtimeCache.empty();
  const auto home = shared ? options.runtimeCache : dir;
  const auto object = home / name.str();
  if (shared && std::filesystem::exists(object)) return object;
  std::filesystem::create_directories(home);
  const auto source = home / (name.str() + ".c");
  writeText(home / "oly_rt.h", runtimeHeaderText());
  writeText(source, runtimeSourceText());
  // Compile to a private name and rename so concurrent builds never observe
  // a partial object.
  const auto partial = home / (name.str() + "." + std::to_string(::getpid()) + ".tmp");
  invoke(compileCommand(profile, profile.residentFlags, home, source, partial), "compiling runtime");
  std::filesystem::rename(partial, object);
  return object;
}

}  // namespace

BuiltKernel buildKernel(const EmittedProgram& program, const std::filesystem::path& dir,
                        const ToolchainProfile& profile, const std::string& kernelName, const BuildOptions& options) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) raise(HostErrorKind::Toolchain, "cannot create " + dir.string() + ": " + ec.message());
  BuiltKernel kernel;
  kernel.kernelName = kernelName;
  kernel.dir = std::filesystem::absolute(dir);
  kernel.profile = profile;
  writeProgram(program, kernel.dir, kernelName);
  writeText(kernel.dir / "oly_rt.h", runtimeHeaderText());

  const auto rt = runtimeObject(profile, kernel.dir, options);
  const auto& resident = program.resident();
  const auto residentObject = kernel.dir / (kernelName + ".o");
  invoke(compileCommand(profile, profile.residentFlags, kernel.dir, kernel.dir / resident.fileName, residentObject),
         "compiling " + resident.fileName);
  kernel.binary = kernel.dir / kernelName;
  std::vector<std::string> link = profile.compiler;
  link.insert(link.end(), {residentObject.string(), rt.string(), "-o", kernel.binary.string()});
  link.insert(link.end(), profile.linkFlags.begin(), profile.linkFlags.end());
  invoke(link, "linking " + kernelName);

  kernel.symbols = program.symbols;
  for (std::size_t i = 1; i < program.units.size(); ++i) {
    const auto& unit = program.units[i];
    const auto object = kernel.dir / std::filesystem::path(unit.fileName).replace_extension(".o");
    invoke(compileCommand(profile, profile.dynamicFlags, kernel.dir, kernel.dir / unit.fileName, object),
           "compiling " + unit.fileName);
    kernel.objects.push_back(object);
  }
  for (auto& entry : kernel.symbols.entries) entry.objectFile = (kernel.dir / entry.objectFile).string();
  writeText(kernel.dir / (kernelName + ".symtab"), kernel.symbols.serialize());
  return kernel;
}

// ---- device session -------------------------------------------------------

int RunReport::loadCount() const {
  return static_cast<int>(std::count_if(events.begin(), events.end(), [](const auto& e) { return e.kind == "load"; }));
}

std::optional<double> RunReport::markInterval(const std::string& from, const std::string& to) const {
  std::optional<std::uint64_t> a, b;
  for (const auto& e : events) {
    if (e.kind != "mark") continue;
    if (e.name == from && !a) a = e.nanos;
    if (e.name == to && a) b = e.nanos;
  }
  if (!a || !b) return std::nullopt;
  return static_cast<double>(*b - *a) * 1e-9;
}

namespace {

class Session {
 public:
  Session(const BuiltKernel& kernel, const RunOptions& options) : kernel_(kernel), options_(options) {}

  RunReport run() {
    int pair[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, pair) != 0)
      raise(HostErrorKind::Process, std::string("socketpair: ") + std::strerror(errno));
    FdGuard host(highFd(pair[0])), device(highFd(pair[1]));
    FdGuard outRead, outWrite, errRead, errWrite;
    makePipe(outRead, outWrite);
    makePipe(errRead, errWrite);

    constexpr int kDeviceFd = 3;
    SpawnPlan plan;
    plan.argv = {kernel_.binary.string()};
    plan.extraEnv = options_.environment;
    plan.extraEnv["OLY_CHANNEL_FD"] = std::to_string(kDeviceFd);
    plan.dups = {{1, outWrite.fd}, {2, errWrite.fd}, {kDeviceFd, device.fd}};
    start_ = std::chrono::steady_clock::now();
    const pid_t pid = spawn(plan);
    device.reset();
    outWrite.reset();
    errWrite.reset();

    const auto deadline = start_ + options_.timeout;
    bool channelOpen = true, outOpen = true, errOpen = true;
    while (channelOpen || outOpen || errOpen) {
      pollfd fds[3];
      nfds_t n = 0;
      int* owners[3];
      auto add = [&](bool open, FdGuard& g) {
        if (!open) return;
        fds[n] = {g.fd, POLLIN, 0};
        owners[n++] = &g.fd;
      };
      add(channelOpen, host);
      add(outOpen, outRead);
      add(errOpen, errRead);
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        report_.timedOut = true;
        ::kill(pid, SIGKILL);
        break;
      }
      const int ready = ::poll(fds, n, static_cast<int>(std::min<long long>(left.count(), 1000)));
      if (ready < 0 && errno != EINTR) break;
      for (nfds_t i = 0; i < n; ++i) {
        if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
        if (owners[i] == &host.fd) {
          channelOpen = serviceChannel(host.fd);
          if (!channelOpen) host.reset();
        } else if (owners[i] == &outRead.fd) {
          outOpen = drain(outRead.fd, report_.stdoutText);
        } else {
          errOpen = drain(errRead.fd, report_.stderrText);
        }
      }
    }
    report_.processStatus = waitStatus(pid);
    report_.wallSeconds = elapsed();
    if (!options_.eventLog.empty()) writeText(options_.eventLog, eventLogJson(report_));
    return std::move(report_);
  }

 private:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  void event(std::string kind, std::string name = {}, std::uint64_t bytes = 0, std::uint64_t nanos = 0) {
    report_.events.push_back({elapsed(), std::move(kind), std::move(name), bytes, nanos});
  }

  /// Returns false once the channel is finished (EOF or protocol error).
  bool serviceChannel(int fd) {
    std::uint8_t buf[65536];
    const ssize_t n = ::read(fd, buf, sizeof buf);
    if (n < 0 && (errno == EINTR || errno == EAGAIN)) return true;
    if (n <= 0) {
      if (!decoder_.idle()) report_.channelError = "channel closed mid-frame";
      return false;
    }
    decoder_.feed({buf, static_cast<std::size_t>(n)});
    try {
      while (auto m = decoder_.next()) handle(fd, *m);
    } catch (const HostError& e) {
      report_.channelError = e.what();
      return false;
    }
    return true;
  }

  void handle(int fd, const wire::Message& m) {
    switch (m.opcode) {
      case wire::Opcode::Load: {
        const std::vector<std::uint8_t>* code = blob(m.text);
        if (!code) {
          event("load-miss", m.text);
          writeAll(fd, wire::encodeLoadReply(wire::kStatusUnknown, {}));
          return;
        }
        event("load", m.text, code->size());
        writeAll(fd, wire::encodeLoadReply(wire::kStatusOk, *code));
        return;
      }
      case wire::Opcode::Output:
        report_.output += m.text;
        event("output", {}, m.text.size());
        return;
      case wire::Opcode::Mark:
        event("mark", m.text, 0, m.nanos);
        return;
      case wire::Opcode::Exit:
        report_.deviceExit = m.status;
        event("exit", {}, 0);
        return;
    }
  }

  /// Code blob for a symbol-table name; extracted once, served identically.
  const std::vector<std::uint8_t>* blob(const std::string& name) {
    if (auto it = cache_.find(name); it != cache_.end()) return &it->second;
    const DynSymbolEntry* entry = kernel_.symbols.find(name);
    if (!entry) return nullptr;
    try {
      ElfImage image = parseElfFile(entry->objectFile);
      auto fn = extractUnitCode(image, entry->mangled, kernel_.profile.machine);
      return &cache_.emplace(name, std::move(fn.codeBytes)).first->second;
    } catch (const ElfError& e) {
      report_.stderrText += std::string("host: ") + e.what() + "\n";
      return nullptr;
    }
  }

  static void writeText(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
  }

  const BuiltKernel& kernel_;
  const RunOptions& options_;
  std::chrono::steady_clock::time_point start_;
  wire::Decoder decoder_;
  std::map<std::string, std::vector<std::uint8_t>> cache_;
  RunReport report_;
};

}  // namespace

RunReport runKernel(const BuiltKernel& kernel, const RunOptions& options) {
  // A device that dies mid-write must not take the host down with SIGPIPE;
  // writes use MSG_NOSIGNAL, this covers anything else.
  ::signal(SIGPIPE, SIG_IGN);
  return Session(kernel, options).run();
}

std::string eventLogJson(const RunReport& report) {
  std::string out;
  for (const auto& e : report.events) {
    nlohmann::json j{{"ts", e.ts}, {"kind", e.kind}};
    if (!e.name.empty()) j["name"] = e.name;
    if (e.kind == "load" || e.kind == "output") j["bytes"] = e.bytes;
    if (e.kind == "mark") j["device_ns"] = e.nanos;
    out += j.dump() + "\n";
  }
  return out;
}

std::uint64_t SizeReport::dynamicBytes() const {
  std::uint64_t total = 0;
  for (const auto& [name, bytes] : functionBytes) total += bytes;
  return total;
}

SizeReport kernelSizes(const BuiltKernel& kernel) {
  SizeReport sizes;
  sizes.residentBytes = parseElfFile(kernel.binary, {.requireRelocatable = false}).allocatedBytes();
  for (const auto& entry : kernel.symbols.entries)
    sizes.functionBytes[entry.sourceName] =
        extractUnitCode(parseElfFile(entry.objectFile), entry.mangled, kernel.profile.machine).size;
  return sizes;
}

Measurement measure(const BuiltKernel& kernel, int repetitions, const RunOptions& options) {
  Measurement m;
  for (int i = 0; i < repetitions; ++i) {
    m.last = runKernel(kernel, options);
    if (m.last.timedOut || m.last.processStatus != 0)
      raise(HostErrorKind::Process, "kernel run failed (status " + std::to_string(m.last.processStatus) + ")\n" +
                                        m.last.stderrText);
    m.samples.push_back(m.last.markInterval("start", "stop").value_or(m.last.wallSeconds));
  }
  m.median = median(m.samples);
  m.iqr = interquartileRange(m.samples);
  m.sizes = kernelSizes(kernel);
  return m;
}

}  // namespace microdyn
