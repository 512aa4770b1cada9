#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "microdyn/codegen.hpp"
#include "microdyn/elf.hpp"

namespace microdyn {

enum class HostErrorKind { Toolchain, Channel, Config, Process };

class HostError : public std::runtime_error {
 public:
  HostError(HostErrorKind kind, const std::string& message);
  HostErrorKind kind() const noexcept { return kind_; }

 private:
  HostErrorKind kind_;
};

/// Device channel framing. Little-endian throughout.
namespace wire {

enum class Opcode : std::uint8_t { Load = 0x01, Output = 0x02, Exit = 0x03, Mark = 0x04 };
inline constexpr std::uint8_t kStatusOk = 0x00;
inline constexpr std::uint8_t kStatusUnknown = 0x01;
inline constexpr std::uint32_t kMaxName = 4096;
inline constexpr std::uint32_t kMaxOutput = 1u << 24;

/// One device-to-host message.
struct Message {
  Opcode opcode = Opcode::Output;
  std::string text;          // LOAD name, OUTPUT text, MARK label
  std::int32_t status = 0;   // EXIT
  std::uint64_t nanos = 0;   // MARK timestamp

  bool operator==(const Message&) const = default;
};

std::vector<std::uint8_t> encode(const Message& message);
/// Host reply to LOAD: status byte, u32 size, code bytes.
std::vector<std::uint8_t> encodeLoadReply(std::uint8_t status, std::span<const std::uint8_t> code);

/// Incremental decoder; bytes may arrive split at any boundary.
class Decoder {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  /// Next complete message; HostError(Channel) on a malformed frame.
  std::optional<Message> next();
  bool idle() const { return buffer_.empty(); }

 private:
  std::deque<std::uint8_t> buffer_;
};

}  // namespace wire

struct ToolchainProfile {
  std::vector<std::string> compiler{"cc"};
  /// Distro hardening defaults off and the two passes dynamic units cannot
  /// use disabled, so every dispatch mode runs the same code generator.
  std::vector<std::string> residentFlags{"-std=c99",
                                         "-O3",
                                         "-fwrapv",
                                         "-fno-stack-protector",
                                         "-fcf-protection=none",
                                         "-fno-tree-loop-distribute-patterns",
                                         "-fno-tree-vectorize"};
  /// Resident optimization level, position independent, with every
  /// construct that would need a relocation or a second code section
  /// switched off: library calls synthesized from loops, and vector
  /// constants, which land in a literal pool.
  std::vector<std::string> dynamicFlags{"-std=c99",
                                        "-O3",
                                        "-fPIC",
                                        "-fwrapv",
                                        "-fno-stack-protector",
                                        "-fno-toplevel-reorder",
                                        "-fno-reorder-blocks-and-partition",
                                        "-fno-jump-tables",
                                        "-fno-asynchronous-unwind-tables",
                                        "-fcf-protection=none",
                                        "-fno-tree-loop-distribute-patterns",
                                        "-fno-tree-vectorize"};
  std::vector<std::string> linkFlags{};
  std::uint16_t machine = hostMachine();

  /// Defaults, then the JSON file named by MICRODYN_TOOLCHAIN, then
  /// MICRODYN_CC (a whitespace-separated command) on top.
  static ToolchainProfile fromEnvironment();
  /// Keys: compiler, resident_flags, dynamic_flags, link_flags, machine.
  /// Unlisted keys keep the values of `base`.
  static ToolchainProfile fromJson(const std::string& text, ToolchainProfile base);
  static ToolchainProfile fromJson(const std::string& text);
};

struct BuildOptions {
  /// Directory for runtime objects shared across builds; empty disables reuse.
  std::filesystem::path runtimeCache;
};

struct BuiltKernel {
  std::string kernelName;
  std::filesystem::path dir;
  std::filesystem::path binary;
  std::vector<std::filesystem::path> objects;
  /// objectFile fields are absolute paths after the build.
  DynSymbolTable symbols;
  ToolchainProfile profile;
};

/// Writes units and runtime into `dir`, compiles and links. HostError(Toolchain)
/// carries the compiler diagnostics.
BuiltKernel buildKernel(const EmittedProgram& program, const std::filesystem::path& dir,
                        const ToolchainProfile& profile, const std::string& kernelName = "kernel",
                        const BuildOptions& options = {});

struct DeviceEvent {
  double ts = 0;  // seconds since spawn
  std::string kind;  // load, load-miss, output, mark, exit
  std::string name;
  std::uint64_t bytes = 0;
  std::uint64_t nanos = 0;  // device clock for marks
};

struct RunOptions {
  std::chrono::milliseconds timeout{60000};
  std::map<std::string, std::string> environment;
  /// JSON-lines event log written after the run when set.
  std::filesystem::path eventLog;
};

struct RunReport {
  int processStatus = -1;     // exit code, or 128 + signal
  std::optional<int> deviceExit;  // status carried by EXIT
  bool timedOut = false;
  std::optional<std::string> channelError;
  std::string output;  // concatenated OUTPUT payloads
  std::string stdoutText;
  std::string stderrText;
  std::vector<DeviceEvent> events;
  double wallSeconds = 0;

  int loadCount() const;
  /// Device-clock seconds between two marks, if both were seen.
  std::optional<double> markInterval(const std::string& from, const std::string& to) const;
};

/// Spawns the kernel with a socket channel and serves LOAD requests from the
/// symbol table until the device exits or closes the channel.
RunReport runKernel(const BuiltKernel& kernel, const RunOptions& options = {});

std::string eventLogJson(const RunReport& report);

struct SizeReport {
  std::uint64_t residentBytes = 0;
  std::map<std::string, std::uint64_t> functionBytes;
  std::uint64_t dynamicBytes() const;
  std::uint64_t totalBytes() const { return residentBytes + dynamicBytes(); }
};

/// Loaded sizes: SHF_ALLOC bytes of the resident binary plus each dynamic
/// function's code blob.
SizeReport kernelSizes(const BuiltKernel& kernel);

struct Measurement {
  std::vector<double> samples;
  double median = 0;
  double iqr = 0;
  SizeReport sizes;
  RunReport last;
};

/// Runs the kernel `repetitions` times. Each sample is the device interval
/// between marks "start" and "stop" when present, else process wall time.
Measurement measure(const BuiltKernel& kernel, int repetitions, const RunOptions& options = {});

struct CommandResult {
  int status = -1;
  std::string output;  // stdout and stderr interleaved
};

/// Runs argv[0] from PATH and waits; HostError(Process) if it cannot start.
CommandResult runCommand(const std::vector<std::string>& argv);

}  // namespace microdyn
