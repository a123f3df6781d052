#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace cvfusion {

namespace fs = std::filesystem;

enum class Binary { normal, abnormal };

// Joint ECG x fundus class:
//   C1 = (normal, normal)    C2 = (normal, abnormal)
//   C3 = (abnormal, normal)  C4 = (abnormal, abnormal)
enum class JointClass { C1 = 0, C2 = 1, C3 = 2, C4 = 3 };

inline constexpr int kNumClasses = 4;

struct ClassLabel {
    JointClass joint = JointClass::C1;
    Binary ecg = Binary::normal;
    Binary fundus = Binary::normal;

    static ClassLabel from_parts(Binary ecg, Binary fundus);
    static ClassLabel from_joint(JointClass joint);
    static ClassLabel from_index(int index);

    int index() const { return static_cast<int>(joint); }
    friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
};

std::string_view to_string(Binary b);
std::string_view to_string(JointClass c);
// Throws SchemaError on unknown tokens.
Binary parse_binary(std::string_view token);
JointClass parse_joint(std::string_view token);

// OD/OS combination: abnormal if either eye is abnormal.
Binary combine_eye_labels(Binary od, std::optional<Binary> os);

struct EcgRecord {
    std::vector<double> samples;  // millivolts
    double fs = 0.0;              // Hz
    std::optional<Binary> label;
    std::string id;

    double duration() const { return fs > 0.0 ? static_cast<double>(samples.size()) / fs : 0.0; }
};

// Throws ParamError if fs <= 0, fewer than 2 samples, or non-finite samples.
void validate(const EcgRecord& record);

// Row-major grayscale image with intensities in [0, 1].
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;
    std::string id;

    double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Minimum side length accepted by the feature pipeline.
inline constexpr int kMinImageSide = 16;

// Throws ParamError on size mismatch, out-of-range intensities, or sides
// shorter than kMinImageSide.
void validate(const GrayImage& image);

// ---------------------------------------------------------------------------
// ECG CSV: `# key=value` header lines (fs_hz required), one sample per line.

EcgRecord parse_ecg_csv(const fs::path& path);
EcgRecord parse_ecg_csv_text(std::string_view text, std::string id = {});
std::string format_ecg_csv(const EcgRecord& record);
void write_ecg_csv(const EcgRecord& record, const fs::path& path);

// ---------------------------------------------------------------------------
// PGM (P2 ASCII / P5 binary, maxval up to 65535, big-endian 16-bit samples).

enum class PgmEncoding { ascii, binary };

GrayImage parse_pgm(const fs::path& path);
GrayImage parse_pgm_bytes(std::string_view bytes, std::string id = {});
std::string format_pgm(const GrayImage& image, int maxval = 255, PgmEncoding encoding = PgmEncoding::binary);
void write_pgm(const GrayImage& image, const fs::path& path, int maxval = 255,
               PgmEncoding encoding = PgmEncoding::binary);

// ---------------------------------------------------------------------------
// Dataset manifest.

enum class Split { train, test, unassigned };

std::string_view to_string(Split s);
Split parse_split(std::string_view token);

struct ManifestEntry {
    std::string id;
    fs::path ecg_path;
    fs::path fundus_od_path;
    std::optional<fs::path> fundus_os_path;
    // Optional ground-truth sidecar written by the synthetic generator.
    std::optional<fs::path> truth_path;
    Binary ecg_label = Binary::normal;
    Binary fundus_od_label = Binary::normal;
    std::optional<Binary> fundus_os_label;
    Binary fundus_label = Binary::normal;  // combined OD/OS
    Split split = Split::unassigned;

    ClassLabel label() const { return ClassLabel::from_parts(ecg_label, fundus_label); }
};

struct DatasetManifest {
    std::vector<ManifestEntry> records;
    std::optional<std::int64_t> seed;
    // Relative paths in the file are resolved against this directory.
    fs::path base_dir;
};

// Loads and validates a manifest. Relative paths are resolved against the
// manifest's directory; every referenced file must exist.
DatasetManifest load_manifest(const fs::path& path);
DatasetManifest parse_manifest(const nlohmann::json& doc, const fs::path& base_dir, bool check_files = true);
// Paths are written relative to base_dir when possible.
nlohmann::json manifest_to_json(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest, const fs::path& path);

// ---------------------------------------------------------------------------
// Reports: CSV tables and JSON documents with deterministic formatting.

struct Missing {
    friend bool operator==(const Missing&, const Missing&) = default;
};

using Cell = std::variant<Missing, std::int64_t, double, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

enum class ReportFormat { json, csv };

// General-format rendering at 9 significant digits; non-finite values as "NA".
std::string format_number(double value);
// Fixed-point rendering with the given number of decimals.
std::string format_fixed(double value, int decimals);

std::string render_csv(const Table& table);
nlohmann::json table_to_json(const Table& table);
// Rounds every floating-point value to 9 significant digits and dumps with
// sorted keys and two-space indentation.
std::string render_json(const nlohmann::json& doc);

void emit_report(const Table& table, const fs::path& path, ReportFormat format);
void emit_report(const nlohmann::json& doc, const fs::path& path);

// Parsed CSV with raw string cells; "NA" marks a missing value.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    // Index of a column or -1.
    int column_index(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const fs::path& path);

std::string read_text_file(const fs::path& path);
void write_text_file(const fs::path& path, std::string_view content);

// Strict decimal parse; nullopt for anything that is not a full finite number.
std::optional<double> parse_double(std::string_view text);

}  // namespace cvfusion
