#include "microdyn/elf.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

namespace microdyn {

std::string_view elfErrorName(ElfErrorKind kind) {
  switch (kind) {
    case ElfErrorKind::BadMagic: return "BadMagicError";
    case ElfErrorKind::Truncated: return "TruncatedFileError";
    case ElfErrorKind::UnsupportedClass: return "UnsupportedClassError";
    case ElfErrorKind::UnsupportedEndianness: return "UnsupportedEndiannessError";
    case ElfErrorKind::NotRelocatable: return "NotRelocatableError";
    case ElfErrorKind::Malformed: return "MalformedElfError";
    case ElfErrorKind::SymbolNotFound: return "SymbolNotFoundError";
    case ElfErrorKind::MachineMismatch: return "MachineMismatchError";
    case ElfErrorKind::RelocationUnresolved: return "RelocationUnresolvedError";
  }
  return "ElfError";
}

ElfError::ElfError(ElfErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(elfErrorName(kind)) + ": " + message), kind_(kind) {}

std::uint16_t hostMachine() {
#if defined(__x86_64__)
  return elf::EM_X86_64;
#elif defined(__i386__)
  return elf::EM_386;
#elif defined(__aarch64__)
  return elf::EM_AARCH64;
#elif defined(__riscv)
  return elf::EM_RISCV;
#else
  return 0;
#endif
}

namespace {

[[noreturn]] void raise(ElfErrorKind kind, const std::string& message) { throw ElfError(kind, message); }

/// Little-endian reads with every access bounds-checked against the file.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t size() const { return bytes_.size(); }

  void require(std::uint64_t offset, std::uint64_t length, const char* what) const {
    if (offset > bytes_.size() || length > bytes_.size() - offset)
      raise(ElfErrorKind::Truncated, std::string(what) + " extends past end of file");
  }

  std::uint64_t uint(std::uint64_t offset, int width) const {
    require(offset, static_cast<std::uint64_t>(width), "field");
    std::uint64_t v = 0;
    for (int i = width - 1; i >= 0; --i) v = (v << 8) | bytes_[offset + static_cast<std::uint64_t>(i)];
    return v;
  }
  std::uint8_t u8(std::uint64_t offset) const { return static_cast<std::uint8_t>(uint(offset, 1)); }
  std::uint16_t u16(std::uint64_t offset) const { return static_cast<std::uint16_t>(uint(offset, 2)); }
  std::uint32_t u32(std::uint64_t offset) const { return static_cast<std::uint32_t>(uint(offset, 4)); }

  std::vector<std::uint8_t> slice(std::uint64_t offset, std::uint64_t length, const char* what) const {
    require(offset, length, what);
    auto first = bytes_.begin() + static_cast<std::ptrdiff_t>(offset);
    return {first, first + static_cast<std::ptrdiff_t>(length)};
  }

 private:
  std::span<const std::uint8_t> bytes_;
};

std::string stringAt(const ElfSection& table, std::uint64_t offset) {
  if (offset >= table.data.size()) raise(ElfErrorKind::Malformed, "string offset outside " + table.name);
  auto first = table.data.begin() + static_cast<std::ptrdiff_t>(offset);
  auto nul = std::find(first, table.data.end(), std::uint8_t{0});
  if (nul == table.data.end()) raise(ElfErrorKind::Malformed, "unterminated string in string table");
  return {first, nul};
}

const ElfSection& linkedStrtab(const ElfImage& image, std::uint32_t index) {
  if (index == 0 || index >= image.sections.size()) raise(ElfErrorKind::Malformed, "string table link out of range");
  const ElfSection& s = image.sections[index];
  if (s.type != 3) raise(ElfErrorKind::Malformed, "linked section is not a string table");
  return s;
}

struct Header {
  bool is64;
  std::uint64_t shoff;
  std::uint16_t shentsize;
  std::uint64_t shnum;
  std::uint32_t shstrndx;
};

Header readHeader(const Reader& r, ElfImage& image, const ElfParseOptions& options) {
  if (r.size() < 4 || r.u8(0) != 0x7f || r.u8(1) != 'E' || r.u8(2) != 'L' || r.u8(3) != 'F')
    raise(ElfErrorKind::BadMagic, "missing \\x7fELF signature");
  if (r.size() < 52) raise(ElfErrorKind::Truncated, "file shorter than an ELF header");
  const std::uint8_t cls = r.u8(4);
  if (cls != 1 && cls != 2) raise(ElfErrorKind::UnsupportedClass, "unknown ELF class " + std::to_string(cls));
  const std::uint8_t data = r.u8(5);
  if (data != 1) raise(ElfErrorKind::UnsupportedEndianness, "only little-endian objects are supported");
  Header h{};
  h.is64 = cls == 2;
  image.is64 = h.is64;
  if (h.is64) r.require(0, 64, "ELF header");
  image.fileType = r.u16(16);
  image.machine = r.u16(18);
  const bool loadable = image.fileType == elf::ET_EXEC || image.fileType == elf::ET_DYN;
  if (image.fileType != elf::ET_REL && (options.requireRelocatable || !loadable))
    raise(ElfErrorKind::NotRelocatable, "file type " + std::to_string(image.fileType) + " is not ET_REL");
  if (h.is64) {
    h.shoff = r.uint(40, 8);
    h.shentsize = r.u16(58);
    h.shnum = r.u16(60);
    h.shstrndx = r.u16(62);
  } else {
    h.shoff = r.u32(32);
    h.shentsize = r.u16(46);
    h.shnum = r.u16(48);
    h.shstrndx = r.u16(50);
  }
  return h;
}

}  // namespace

ElfImage parseElf(std::span<const std::uint8_t> bytes, const ElfParseOptions& options) {
  Reader r(bytes);
  ElfImage image;
  Header h = readHeader(r, image, options);
  const std::uint16_t wantEntsize = h.is64 ? 64 : 40;
  if (h.shoff == 0) {
    if (h.shnum != 0) raise(ElfErrorKind::Malformed, "sections declared without a section table");
    return image;
  }
  if (h.shentsize != wantEntsize) raise(ElfErrorKind::Malformed, "unexpected section header size");
  r.require(h.shoff, wantEntsize, "section header table");
  // Extended numbering keeps the real counts in section 0.
  if (h.shnum == 0) h.shnum = h.is64 ? r.uint(h.shoff + 32, 8) : r.u32(h.shoff + 20);
  if (h.shstrndx == 0xffff) h.shstrndx = r.u32(h.shoff + (h.is64 ? 40 : 24));
  if (h.shnum > (r.size() - h.shoff) / wantEntsize)
    raise(ElfErrorKind::Truncated, "section header table extends past end of file");

  std::vector<std::uint32_t> nameOffsets;
  image.sections.reserve(static_cast<std::size_t>(h.shnum));
  for (std::uint64_t i = 0; i < h.shnum; ++i) {
    const std::uint64_t at = h.shoff + i * wantEntsize;
    ElfSection s;
    nameOffsets.push_back(r.u32(at));
    s.type = r.u32(at + 4);
    if (h.is64) {
      s.flags = r.uint(at + 8, 8);
      s.offset = r.uint(at + 24, 8);
      s.size = r.uint(at + 32, 8);
      s.link = r.u32(at + 40);
      s.info = r.u32(at + 44);
      s.entsize = r.uint(at + 56, 8);
    } else {
      s.flags = r.u32(at + 8);
      s.offset = r.u32(at + 16);
      s.size = r.u32(at + 20);
      s.link = r.u32(at + 24);
      s.info = r.u32(at + 28);
      s.entsize = r.u32(at + 36);
    }
    if (i > 0 && s.type != elf::SHT_NOBITS && s.type != 0) s.data = r.slice(s.offset, s.size, "section contents");
    image.sections.push_back(std::move(s));
  }

  if (h.shstrndx != 0) {
    if (h.shstrndx >= image.sections.size()) raise(ElfErrorKind::Malformed, "section name table index out of range");
    const ElfSection names = image.sections[h.shstrndx];
    if (names.type != 3) raise(ElfErrorKind::Malformed, "section name table is not a string table");
    for (std::size_t i = 1; i < image.sections.size(); ++i) image.sections[i].name = stringAt(names, nameOffsets[i]);
  }

  // Symbols: the single SHT_SYMTAB and the string table it links to.
  int symtabIndex = -1;
  for (std::size_t i = 1; i < image.sections.size(); ++i) {
    if (image.sections[i].type != elf::SHT_SYMTAB) continue;
    if (symtabIndex >= 0) raise(ElfErrorKind::Malformed, "more than one symbol table");
    symtabIndex = static_cast<int>(i);
  }
  if (symtabIndex >= 0) {
    const ElfSection& symtab = image.sections[static_cast<std::size_t>(symtabIndex)];
    const std::uint64_t entsize = h.is64 ? 24 : 16;
    if (symtab.entsize != entsize) raise(ElfErrorKind::Malformed, "unexpected symbol entry size");
    if (symtab.size % entsize != 0) raise(ElfErrorKind::Malformed, "symbol table size not a multiple of entry size");
    const ElfSection& strtab = linkedStrtab(image, symtab.link);
    Reader sr(symtab.data);
    for (std::uint64_t at = 0; at < symtab.data.size(); at += entsize) {
      ElfSymbol sym;
      const std::uint32_t nameOffset = sr.u32(at);
      std::uint8_t info = 0;
      if (h.is64) {
        info = sr.u8(at + 4);
        sym.sectionIndex = sr.u16(at + 6);
        sym.value = sr.uint(at + 8, 8);
        sym.size = sr.uint(at + 16, 8);
      } else {
        sym.value = sr.u32(at + 4);
        sym.size = sr.u32(at + 8);
        info = sr.u8(at + 12);
        sym.sectionIndex = sr.u16(at + 14);
      }
      sym.type = info & 0xf;
      sym.binding = static_cast<std::uint8_t>(info >> 4);
      if (sym.sectionIndex != elf::SHN_UNDEF && sym.sectionIndex < elf::SHN_LORESERVE &&
          sym.sectionIndex >= image.sections.size())
        raise(ElfErrorKind::Malformed, "symbol section index out of range");
      if (nameOffset != 0) sym.name = stringAt(strtab, nameOffset);
      image.symbols.push_back(std::move(sym));
    }
  }

  for (std::size_t i = 1; i < image.sections.size(); ++i) {
    const ElfSection& s = image.sections[i];
    if (s.type != elf::SHT_REL && s.type != elf::SHT_RELA) continue;
    const bool rela = s.type == elf::SHT_RELA;
    const std::uint64_t entsize = h.is64 ? (rela ? 24 : 16) : (rela ? 12 : 8);
    if (s.entsize != entsize || s.size % entsize != 0) raise(ElfErrorKind::Malformed, "bad relocation entry size");
    // Linked files index .dynsym from their relocations; they are only
    // inspected for sizes, never extracted from.
    if (image.fileType != elf::ET_REL) continue;
    if (s.info == 0 || s.info >= image.sections.size())
      raise(ElfErrorKind::Malformed, "relocation target section out of range");
    Reader rr(s.data);
    for (std::uint64_t at = 0; at < s.data.size(); at += entsize) {
      ElfRelocation rel;
      rel.targetSection = static_cast<int>(s.info);
      if (h.is64) {
        rel.offset = rr.uint(at, 8);
        const std::uint64_t info = rr.uint(at + 8, 8);
        rel.symbol = static_cast<std::uint32_t>(info >> 32);
        rel.type = static_cast<std::uint32_t>(info & 0xffffffffu);
      } else {
        rel.offset = rr.u32(at);
        const std::uint32_t info = rr.u32(at + 4);
        rel.symbol = info >> 8;
        rel.type = info & 0xffu;
      }
      if (rel.symbol >= std::max<std::size_t>(image.symbols.size(), 1))
        raise(ElfErrorKind::Malformed, "relocation symbol index out of range");
      image.relocations.push_back(rel);
    }
  }
  return image;
}

ElfImage parseElfFile(const std::filesystem::path& path, const ElfParseOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ElfErrorKind::Truncated, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parseElf(bytes, options);
}

const ElfSection* ElfImage::section(std::string_view name) const {
  for (const auto& s : sections)
    if (s.name == name) return &s;
  return nullptr;
}

const ElfSymbol* ElfImage::symbol(std::string_view name) const {
  for (const auto& s : symbols)
    if (s.name == name) return &s;
  return nullptr;
}

std::uint64_t ElfImage::allocatedBytes() const {
  std::uint64_t total = 0;
  for (const auto& s : sections)
    if (s.flags & elf::SHF_ALLOC) total += s.size;
  return total;
}

namespace {

const ElfSymbol& functionSymbol(const ElfImage& image, std::string_view name, std::uint16_t expectedMachine) {
  if (image.machine != expectedMachine)
    raise(ElfErrorKind::MachineMismatch, "object machine " + std::to_string(image.machine) + ", expected " +
                                             std::to_string(expectedMachine));
  for (const auto& s : image.symbols) {
    if (s.name != name || s.type != elf::STT_FUNC) continue;
    if (s.sectionIndex == elf::SHN_UNDEF || s.sectionIndex >= elf::SHN_LORESERVE) continue;
    return s;
  }
  raise(ElfErrorKind::SymbolNotFound, "no defined function symbol " + std::string(name));
}

void rejectRelocations(const ElfImage& image, int section, std::uint64_t begin, std::uint64_t end,
                       std::string_view what) {
  for (const auto& rel : image.relocations) {
    if (rel.targetSection != section || rel.offset < begin || rel.offset >= end) continue;
    const ElfSymbol* sym = rel.symbol < image.symbols.size() ? &image.symbols[rel.symbol] : nullptr;
    std::string target = sym && !sym->name.empty() ? sym->name : "section-relative";
    raise(ElfErrorKind::RelocationUnresolved, std::string(what) + " needs relocation at +" +
                                                  std::to_string(rel.offset - begin) + " against " + target);
  }
}

}  // namespace

ElfFunction extractFunction(const ElfImage& image, std::string_view symbolName, std::uint16_t expectedMachine) {
  const ElfSymbol& sym = functionSymbol(image, symbolName, expectedMachine);
  const ElfSection& sec = image.sections[sym.sectionIndex];
  if (sym.size == 0) raise(ElfErrorKind::Malformed, "function " + std::string(symbolName) + " has zero size");
  // ET_REL symbol values are section offsets.
  if (sym.value > sec.data.size() || sym.size > sec.data.size() - sym.value)
    raise(ElfErrorKind::Malformed, "function span outside its section");
  rejectRelocations(image, sym.sectionIndex, sym.value, sym.value + sym.size, symbolName);
  ElfFunction fn;
  fn.name = std::string(symbolName);
  fn.codeBytes.assign(sec.data.begin() + static_cast<std::ptrdiff_t>(sym.value),
                      sec.data.begin() + static_cast<std::ptrdiff_t>(sym.value + sym.size));
  fn.size = sym.size;
  fn.machine = image.machine;
  return fn;
}

ElfFunction extractUnitCode(const ElfImage& image, std::string_view entry, std::uint16_t expectedMachine) {
  const ElfSymbol& sym = functionSymbol(image, entry, expectedMachine);
  const ElfSection& sec = image.sections[sym.sectionIndex];
  if (sym.value != 0) raise(ElfErrorKind::Malformed, std::string(entry) + " is not at the start of its section");
  if (sec.data.empty()) raise(ElfErrorKind::Malformed, "empty code section");
  rejectRelocations(image, sym.sectionIndex, 0, sec.data.size(), entry);
  // Code elsewhere (e.g. split cold paths) would need a relocation to reach;
  // a second executable section with content means the unit is not closed.
  for (std::size_t i = 1; i < image.sections.size(); ++i) {
    const ElfSection& other = image.sections[i];
    if (static_cast<int>(i) != sym.sectionIndex && (other.flags & elf::SHF_EXECINSTR) && other.size > 0)
      raise(ElfErrorKind::RelocationUnresolved, "code split across sections (" + other.name + ")");
  }
  ElfFunction fn;
  fn.name = std::string(entry);
  fn.codeBytes = sec.data;
  fn.size = sec.data.size();
  fn.machine = image.machine;
  return fn;
}

std::string dumpElf(const ElfImage& image) {
  std::ostringstream out;
  out << "class ELF" << (image.is64 ? 64 : 32) << " type " << image.fileType << " machine " << image.machine << "\n";
  out << "sections:\n";
  for (std::size_t i = 0; i < image.sections.size(); ++i) {
    const auto& s = image.sections[i];
    out << "  [" << std::setw(2) << i << "] " << std::left << std::setw(24) << (s.name.empty() ? "-" : s.name)
        << std::right << " type " << std::setw(2) << s.type << " size " << std::setw(8) << s.size
        << (s.flags & elf::SHF_ALLOC ? " A" : "") << (s.flags & elf::SHF_EXECINSTR ? "X" : "") << "\n";
  }
  out << "symbols:\n";
  for (const auto& sym : image.symbols) {
    if (sym.name.empty()) continue;
    out << "  " << std::left << std::setw(24) << sym.name << std::right << " value " << std::setw(8) << sym.value
        << " size " << std::setw(6) << sym.size << " type " << static_cast<int>(sym.type) << " bind "
        << static_cast<int>(sym.binding) << " shndx " << sym.sectionIndex << "\n";
  }
  out << "relocations: " << image.relocations.size() << "\n";
  out << "allocated bytes: " << image.allocatedBytes() << "\n";
  return out.str();
}

}  // namespace microdyn
