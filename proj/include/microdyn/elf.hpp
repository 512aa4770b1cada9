#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace microdyn {

enum class ElfErrorKind {
  BadMagic,
  Truncated,
  UnsupportedClass,
  UnsupportedEndianness,
  NotRelocatable,
  Malformed,
  SymbolNotFound,
  MachineMismatch,
  RelocationUnresolved,
};

std::string_view elfErrorName(ElfErrorKind kind);

class ElfError : public std::runtime_error {
 public:
  ElfError(ElfErrorKind kind, const std::string& message);
  ElfErrorKind kind() const noexcept { return kind_; }

 private:
  ElfErrorKind kind_;
};

namespace elf {
inline constexpr std::uint16_t ET_REL = 1;
inline constexpr std::uint16_t ET_EXEC = 2;
inline constexpr std::uint16_t ET_DYN = 3;
inline constexpr std::uint32_t SHT_SYMTAB = 2;
inline constexpr std::uint32_t SHT_RELA = 4;
inline constexpr std::uint32_t SHT_NOBITS = 8;
inline constexpr std::uint32_t SHT_REL = 9;
inline constexpr std::uint64_t SHF_ALLOC = 0x2;
inline constexpr std::uint64_t SHF_EXECINSTR = 0x4;
inline constexpr std::uint8_t STT_FUNC = 2;
inline constexpr std::uint16_t SHN_UNDEF = 0;
inline constexpr std::uint16_t SHN_LORESERVE = 0xff00;
inline constexpr std::uint16_t EM_386 = 3;
inline constexpr std::uint16_t EM_X86_64 = 62;
inline constexpr std::uint16_t EM_AARCH64 = 183;
inline constexpr std::uint16_t EM_MICROBLAZE = 189;
inline constexpr std::uint16_t EM_RISCV = 243;
inline constexpr std::uint16_t EM_ADAPTEVA_EPIPHANY = 0x1223;
}  // namespace elf

/// Machine tag of the toolchain this library was built with.
std::uint16_t hostMachine();

struct ElfSection {
  std::string name;
  std::uint32_t type = 0;
  std::uint64_t flags = 0;
  std::uint64_t offset = 0;
  std::uint64_t size = 0;
  std::uint32_t link = 0;
  std::uint32_t info = 0;
  std::uint64_t entsize = 0;
  /// File bytes; empty for SHT_NOBITS.
  std::vector<std::uint8_t> data;
};

struct ElfSymbol {
  std::string name;
  std::uint64_t value = 0;
  std::uint64_t size = 0;
  /// Section index, or a reserved sentinel (undefined, absolute, common).
  std::uint16_t sectionIndex = 0;
  std::uint8_t type = 0;
  std::uint8_t binding = 0;
};

struct ElfRelocation {
  int targetSection = 0;
  std::uint64_t offset = 0;
  std::uint32_t symbol = 0;
  std::uint32_t type = 0;
};

struct ElfImage {
  bool is64 = true;
  std::uint16_t fileType = 0;
  std::uint16_t machine = 0;
  std::vector<ElfSection> sections;
  std::vector<ElfSymbol> symbols;  // index 0 is the null symbol when present
  std::vector<ElfRelocation> relocations;

  const ElfSection* section(std::string_view name) const;
  const ElfSymbol* symbol(std::string_view name) const;
  /// Sum of SHF_ALLOC section sizes: what a loader places in memory.
  std::uint64_t allocatedBytes() const;
};

struct ElfParseOptions {
  /// Executables and shared objects are accepted for size inspection only.
  bool requireRelocatable = true;
};

ElfImage parseElf(std::span<const std::uint8_t> bytes, const ElfParseOptions& options = {});
/// Reads and parses a file; Truncated on an unreadable file.
ElfImage parseElfFile(const std::filesystem::path& path, const ElfParseOptions& options = {});

struct ElfFunction {
  std::string name;
  std::vector<std::uint8_t> codeBytes;
  std::uint64_t size = 0;
  std::uint16_t machine = 0;
};

/// Bytes of one function symbol's span. Any relocation inside the span is
/// fatal because the device loader performs no linking.
ElfFunction extractFunction(const ElfImage& image, std::string_view symbolName, std::uint16_t expectedMachine);

/// The whole executable section holding `entry`, which must sit at offset 0,
/// so static helpers travel with the entry. Any relocation against the section
/// is fatal.
ElfFunction extractUnitCode(const ElfImage& image, std::string_view entry, std::uint16_t expectedMachine);

/// readelf-style listing of sections and symbols.
std::string dumpElf(const ElfImage& image);

}  // namespace microdyn
