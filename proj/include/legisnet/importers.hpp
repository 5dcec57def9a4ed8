#pragma once

// Conversion of raw national source files into canonical corpus XML.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace legisnet {

/// Read access to a zip archive (stored and deflated entries; no zip64).
class ZipArchive {
 public:
  struct Entry {
    std::string name;
    std::size_t size = 0;
    std::size_t compressed_size = 0;
    std::uint16_t method = 0;
    std::size_t header_offset = 0;
  };

  /// Throws ParseError for files that are not zip archives.
  explicit ZipArchive(const std::filesystem::path& path);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  /// Throws ParseError for unknown names and corrupt data.
  std::string read(std::string_view name) const;

 private:
  std::filesystem::path path_;
  std::vector<Entry> entries_;
};

/// A raw-format converter. Implementations emit documents in the canonical
/// schema; everything downstream sees only that.
class Importer {
 public:
  virtual ~Importer() = default;
  virtual std::string_view name() const = 0;
  /// Whether `file` (a name inside an archive or directory) is a source document.
  virtual bool accepts(std::string_view file) const = 0;
  /// Document key of an accepted file; the file stem by default.
  virtual std::string document_key(std::string_view file) const;
  /// Canonical XML for one source document.
  virtual std::string convert(std::string_view bytes, std::string_view file, std::string_view date) const = 0;
};

/// US Code XHTML from the annual historical archives: one file per Title,
/// sections delimited by documentid comments with the hierarchy in expcite
/// comments. Only statute text is kept; notes, source credits and amendment
/// history are dropped. Appendix Titles are marked as appendices.
class UscXhtmlImporter final : public Importer {
 public:
  std::string_view name() const override { return "usc-xhtml"; }
  bool accepts(std::string_view file) const override;
  std::string document_key(std::string_view file) const override;
  std::string convert(std::string_view bytes, std::string_view file, std::string_view date) const override;

  /// Document key of a Title file ("usc05a.htm" -> "5a"), or nullopt.
  static std::optional<std::string> title_key(std::string_view file);
  /// Statute text of every section, tags removed and entities decoded.
  static std::vector<std::string> statute_texts(std::string_view bytes);
};

/// Text with tags removed and character references decoded.
std::string strip_markup(std::string_view html);

struct ImportResult {
  std::filesystem::path manifest;
  std::vector<std::string> documents;
};

/// Converts the accepted entries of `archive` (all of them, or those whose
/// document key is listed in `only`) into `out_dir`, writing one XML file per
/// document and a snapshot manifest. Every written file is parsed back to
/// check it against the canonical schema.
ImportResult import_archive(const std::filesystem::path& archive, const Importer& importer,
                            const std::filesystem::path& out_dir, std::string_view collection_id,
                            std::chrono::year_month_day date, const std::vector<std::string>& only = {});

}  // namespace legisnet
