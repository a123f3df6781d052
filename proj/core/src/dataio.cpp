#include "cvfusion/dataio.hpp"

#include "cvfusion/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cvfusion {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        const std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

}  // namespace

// ---------------------------------------------------------------------------
// Labels

ClassLabel ClassLabel::from_parts(Binary ecg, Binary fundus) {
    const int idx = (ecg == Binary::abnormal ? 2 : 0) + (fundus == Binary::abnormal ? 1 : 0);
    return ClassLabel{static_cast<JointClass>(idx), ecg, fundus};
}

ClassLabel ClassLabel::from_joint(JointClass joint) {
    const int idx = static_cast<int>(joint);
    return ClassLabel{joint, (idx & 2) ? Binary::abnormal : Binary::normal,
                      (idx & 1) ? Binary::abnormal : Binary::normal};
}

ClassLabel ClassLabel::from_index(int index) {
    if (index < 0 || index >= kNumClasses) {
        throw ParamError("class index out of range: " + std::to_string(index));
    }
    return from_joint(static_cast<JointClass>(index));
}

std::string_view to_string(Binary b) { return b == Binary::normal ? "normal" : "abnormal"; }

std::string_view to_string(JointClass c) {
    switch (c) {
        case JointClass::C1: return "C1";
        case JointClass::C2: return "C2";
        case JointClass::C3: return "C3";
        case JointClass::C4: return "C4";
    }
    return "C1";
}

Binary parse_binary(std::string_view token) {
    if (token == "normal") return Binary::normal;
    if (token == "abnormal") return Binary::abnormal;
    throw SchemaError("unknown label token '" + std::string(token) + "'");
}

JointClass parse_joint(std::string_view token) {
    if (token == "C1") return JointClass::C1;
    if (token == "C2") return JointClass::C2;
    if (token == "C3") return JointClass::C3;
    if (token == "C4") return JointClass::C4;
    throw SchemaError("unknown class token '" + std::string(token) + "'");
}

Binary combine_eye_labels(Binary od, std::optional<Binary> os) {
    if (od == Binary::abnormal) return Binary::abnormal;
    if (os && *os == Binary::abnormal) return Binary::abnormal;
    return Binary::normal;
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::test: return "test";
        case Split::unassigned: return "unassigned";
    }
    return "unassigned";
}

Split parse_split(std::string_view token) {
    if (token == "train") return Split::train;
    if (token == "test") return Split::test;
    if (token == "unassigned") return Split::unassigned;
    throw SchemaError("unknown split token '" + std::string(token) + "'");
}

// ---------------------------------------------------------------------------
// Validation

void validate(const EcgRecord& record) {
    if (!(record.fs > 0.0) || !std::isfinite(record.fs)) {
        throw ParamError("ECG record '" + record.id + "': sampling rate must be positive");
    }
    if (record.samples.size() < 2) {
        throw ParamError("ECG record '" + record.id + "': needs at least 2 samples");
    }
    for (double v : record.samples) {
        if (!std::isfinite(v)) throw ParamError("ECG record '" + record.id + "': non-finite sample");
    }
}

void validate(const GrayImage& image) {
    if (image.width < kMinImageSide || image.height < kMinImageSide) {
        throw ParamError("image '" + image.id + "': sides must be at least " + std::to_string(kMinImageSide));
    }
    if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
        throw ParamError("image '" + image.id + "': pixel count does not match dimensions");
    }
    for (double v : image.pixels) {
        if (!(v >= 0.0 && v <= 1.0)) throw ParamError("image '" + image.id + "': intensity outside [0,1]");
    }
}

// ---------------------------------------------------------------------------
// Numbers

std::optional<double> parse_double(std::string_view text) {
    text = trim(text);
    if (text.empty()) return std::nullopt;
    if (text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

std::string format_number(double value) {
    if (!std::isfinite(value)) return "NA";
    if (value == 0.0) return "0";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 9);
    return std::string(buf, res.ptr);
}

std::string format_fixed(double value, int decimals) {
    if (!std::isfinite(value)) return "NA";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, decimals);
    std::string out(buf, res.ptr);
    if (out.starts_with("-") && out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
    return out;
}

// ---------------------------------------------------------------------------
// Files

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        if (!fs::exists(path)) throw MissingFileError("file not found: " + path.string());
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// ECG CSV

EcgRecord parse_ecg_csv_text(std::string_view text, std::string id) {
    EcgRecord record;
    record.id = std::move(id);
    bool have_fs = false;
    bool in_body = false;

    const auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string_view raw = lines[i];
        const std::string line_no = std::to_string(i + 1);
        if (raw.starts_with("#")) {
            if (in_body) throw FormatError("line " + line_no + ": header line after samples");
            if (!raw.starts_with("# ")) throw FormatError("line " + line_no + ": header must start with '# '");
            const std::string_view kv = trim(raw.substr(2));
            const auto eq = kv.find('=');
            if (eq == std::string_view::npos) throw FormatError("line " + line_no + ": header is not key=value");
            const std::string_view key = trim(kv.substr(0, eq));
            const std::string_view value = trim(kv.substr(eq + 1));
            if (key == "fs_hz") {
                const auto fs_value = parse_double(value);
                if (!fs_value || *fs_value <= 0.0) {
                    throw FormatError("line " + line_no + ": fs_hz must be a positive decimal");
                }
                record.fs = *fs_value;
                have_fs = true;
            } else if (key == "units") {
                if (value != "mV") throw FormatError("line " + line_no + ": unsupported units '" + std::string(value) + "'");
            } else if (key == "label") {
                if (value == "normal" || value == "abnormal") {
                    record.label = value == "normal" ? Binary::normal : Binary::abnormal;
                } else if (value != "unknown") {
                    throw FormatError("line " + line_no + ": unknown label '" + std::string(value) + "'");
                }
            } else if (key == "id") {
                if (record.id.empty()) record.id = std::string(value);
            }
            continue;
        }
        const std::string_view body = trim(raw);
        if (body.empty()) {
            // Only a trailing blank line is tolerated.
            if (i + 1 == lines.size()) continue;
            throw FormatError("line " + line_no + ": empty line in sample body");
        }
        in_body = true;
        const auto v = parse_double(body);
        if (!v) throw FormatError("line " + line_no + ": non-numeric sample '" + std::string(body) + "'");
        record.samples.push_back(*v);
    }

    if (!have_fs) throw FormatError("missing '# fs_hz=' header");
    if (static_cast<double>(record.samples.size()) < 2.0 * record.fs) {
        throw TooShortError("record '" + record.id + "' is shorter than 2 s (" +
                            std::to_string(record.samples.size()) + " samples at " + format_number(record.fs) +
                            " Hz)");
    }
    return record;
}

EcgRecord parse_ecg_csv(const fs::path& path) {
    return parse_ecg_csv_text(read_text_file(path), path.stem().string());
}

std::string format_ecg_csv(const EcgRecord& record) {
    std::string out;
    out.reserve(record.samples.size() * 16 + 64);
    out += "# fs_hz=" + format_number(record.fs) + "\n";
    out += "# units=mV\n";
    if (record.label) out += "# label=" + std::string(to_string(*record.label)) + "\n";
    char buf[64];
    for (double v : record.samples) {
        const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 12);
        out.append(buf, res.ptr);
        out += '\n';
    }
    return out;
}

void write_ecg_csv(const EcgRecord& record, const fs::path& path) {
    write_text_file(path, format_ecg_csv(record));
}

// ---------------------------------------------------------------------------
// PGM

namespace {

class PgmHeaderReader {
public:
    explicit PgmHeaderReader(std::string_view bytes) : bytes_(bytes) {}

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const char c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
                ++pos_;
            } else {
                break;
            }
        }
    }

    long read_uint(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        long value = 0;
        while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000'000L) throw FormatError(std::string("PGM ") + what + " too large");
            ++pos_;
        }
        if (pos_ == start) throw FormatError(std::string("PGM: expected ") + what);
        return value;
    }

    std::size_t pos() const { return pos_; }
    void advance(std::size_t n) { pos_ += n; }
    std::string_view bytes() const { return bytes_; }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

GrayImage parse_pgm_bytes(std::string_view bytes, std::string id) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
        throw FormatError("PGM: unsupported magic (expected P2 or P5)");
    }
    const bool binary = bytes[1] == '5';
    PgmHeaderReader reader(bytes);
    reader.advance(2);
    const long width = reader.read_uint("width");
    const long height = reader.read_uint("height");
    const long maxval = reader.read_uint("maxval");
    if (width <= 0 || height <= 0) throw FormatError("PGM: zero dimension");
    if (maxval < 1 || maxval > 65535) throw FormatError("PGM: maxval must be in [1, 65535]");
    if (width * height > 64L * 1024 * 1024) throw FormatError("PGM: image too large");

    GrayImage image;
    image.id = std::move(id);
    image.width = static_cast<int>(width);
    image.height = static_cast<int>(height);
    const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    image.pixels.resize(count);
    auto store = [&](std::size_t i, long v) {
        if (v > maxval) throw FormatError("PGM: sample exceeds maxval");
        image.pixels[i] = static_cast<double>(v) / static_cast<double>(maxval);
    };

    if (binary) {
        // Exactly one whitespace byte separates maxval from the raster.
        std::string_view b = reader.bytes();
        std::size_t pos = reader.pos();
        if (pos >= b.size() || !(b[pos] == ' ' || b[pos] == '\n' || b[pos] == '\r' || b[pos] == '\t')) {
            throw FormatError("PGM: missing separator before raster");
        }
        ++pos;
        const std::size_t bps = maxval > 255 ? 2 : 1;
        if (b.size() - pos < count * bps) throw FormatError("PGM: truncated raster");
        for (std::size_t i = 0; i < count; ++i) {
            const auto* p = reinterpret_cast<const unsigned char*>(b.data() + pos + i * bps);
            const long v = bps == 2 ? (static_cast<long>(p[0]) << 8) | p[1] : p[0];
            store(i, v);
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            long v = 0;
            try {
                v = reader.read_uint("sample");
            } catch (const FormatError&) {
                throw FormatError("PGM: truncated raster (sample " + std::to_string(i) + ")");
            }
            store(i, v);
        }
    }
    return image;
}

GrayImage parse_pgm(const fs::path& path) {
    return parse_pgm_bytes(read_text_file(path), path.stem().string());
}

std::string format_pgm(const GrayImage& image, int maxval, PgmEncoding encoding) {
    if (maxval < 1 || maxval > 65535) throw ParamError("PGM maxval must be in [1, 65535]");
    if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
        throw ParamError("image '" + image.id + "': pixel count does not match dimensions");
    }
    std::string out = (encoding == PgmEncoding::binary ? "P5\n" : "P2\n") + std::to_string(image.width) + " " +
                      std::to_string(image.height) + "\n" + std::to_string(maxval) + "\n";
    auto quantize = [maxval](double v) {
        const double c = std::clamp(v, 0.0, 1.0);
        return static_cast<long>(std::lround(c * maxval));
    };
    if (encoding == PgmEncoding::binary) {
        const bool wide = maxval > 255;
        out.reserve(out.size() + image.pixels.size() * (wide ? 2 : 1));
        for (double v : image.pixels) {
            const long q = quantize(v);
            if (wide) out += static_cast<char>((q >> 8) & 0xFF);
            out += static_cast<char>(q & 0xFF);
        }
    } else {
        for (int y = 0; y < image.height; ++y) {
            for (int x = 0; x < image.width; ++x) {
                if (x > 0) out += ' ';
                out += std::to_string(quantize(image.at(x, y)));
            }
            out += '\n';
        }
    }
    return out;
}

void write_pgm(const GrayImage& image, const fs::path& path, int maxval, PgmEncoding encoding) {
    write_text_file(path, format_pgm(image, maxval, encoding));
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

std::string require_string(const nlohmann::json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(where + ": missing '" + key + "'");
    if (!it->is_string()) throw SchemaError(where + ": '" + key + "' must be a string");
    return it->get<std::string>();
}

std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw SchemaError(where + ": '" + key + "' must be a string");
    return it->get<std::string>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

void require_file(const fs::path& path, const std::string& where) {
    if (!fs::is_regular_file(path)) throw MissingFileError(where + ": file not found: " + path.string());
}

std::string relative_to(const fs::path& path, const fs::path& base) {
    if (base.empty()) return path.generic_string();
    const fs::path rel = path.lexically_relative(base);
    if (rel.empty() || rel.native().starts_with("..")) return path.generic_string();
    return rel.generic_string();
}

}  // namespace

DatasetManifest parse_manifest(const nlohmann::json& doc, const fs::path& base_dir, bool check_files) {
    if (!doc.is_object()) throw SchemaError("manifest: top level must be an object");
    DatasetManifest manifest;
    manifest.base_dir = base_dir;
    if (const auto it = doc.find("seed"); it != doc.end() && !it->is_null()) {
        if (!it->is_number_integer()) throw SchemaError("manifest: 'seed' must be an integer");
        manifest.seed = it->get<std::int64_t>();
    }
    const auto recs = doc.find("records");
    if (recs == doc.end() || !recs->is_array()) throw SchemaError("manifest: 'records' must be an array");
    if (recs->empty()) throw SchemaError("manifest: empty dataset");

    std::set<std::string> seen;
    for (std::size_t i = 0; i < recs->size(); ++i) {
        const auto& r = (*recs)[i];
        std::string where = "manifest record " + std::to_string(i);
        if (!r.is_object()) throw SchemaError(where + ": must be an object");
        ManifestEntry e;
        e.id = require_string(r, "id", where);
        where += " ('" + e.id + "')";
        if (e.id.empty()) throw SchemaError(where + ": empty id");
        if (!seen.insert(e.id).second) throw SchemaError(where + ": duplicate id");

        e.ecg_path = resolve(base_dir, require_string(r, "ecg_path", where));
        e.fundus_od_path = resolve(base_dir, require_string(r, "fundus_od_path", where));
        if (auto os = optional_string(r, "fundus_os_path", where)) e.fundus_os_path = resolve(base_dir, *os);
        if (auto truth = optional_string(r, "truth_path", where)) e.truth_path = resolve(base_dir, *truth);

        e.ecg_label = parse_binary(require_string(r, "ecg_label", where));
        if (auto od = optional_string(r, "fundus_od_label", where)) {
            e.fundus_od_label = parse_binary(*od);
        } else if (auto combined = optional_string(r, "fundus_label", where)) {
            e.fundus_od_label = parse_binary(*combined);
        } else {
            throw SchemaError(where + ": missing 'fundus_od_label'");
        }
        if (auto os = optional_string(r, "fundus_os_label", where)) e.fundus_os_label = parse_binary(*os);
        e.fundus_label = combine_eye_labels(e.fundus_od_label, e.fundus_os_label);
        e.split = parse_split(optional_string(r, "split", where).value_or("unassigned"));

        if (check_files) {
            require_file(e.ecg_path, where);
            require_file(e.fundus_od_path, where);
            if (e.fundus_os_path) require_file(*e.fundus_os_path, where);
            if (e.truth_path) require_file(*e.truth_path, where);
        }
        manifest.records.push_back(std::move(e));
    }
    return manifest;
}

DatasetManifest load_manifest(const fs::path& path) {
    const std::string text = read_text_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("manifest " + path.string() + ": invalid JSON: " + e.what());
    }
    return parse_manifest(doc, path.parent_path(), true);
}

nlohmann::json manifest_to_json(const DatasetManifest& manifest) {
    nlohmann::json doc;
    if (manifest.seed) doc["seed"] = *manifest.seed;
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& e : manifest.records) {
        nlohmann::json r;
        r["id"] = e.id;
        r["ecg_path"] = relative_to(e.ecg_path, manifest.base_dir);
        r["fundus_od_path"] = relative_to(e.fundus_od_path, manifest.base_dir);
        if (e.fundus_os_path) r["fundus_os_path"] = relative_to(*e.fundus_os_path, manifest.base_dir);
        if (e.truth_path) r["truth_path"] = relative_to(*e.truth_path, manifest.base_dir);
        r["ecg_label"] = std::string(to_string(e.ecg_label));
        r["fundus_od_label"] = std::string(to_string(e.fundus_od_label));
        if (e.fundus_os_label) r["fundus_os_label"] = std::string(to_string(*e.fundus_os_label));
        r["split"] = std::string(to_string(e.split));
        recs.push_back(std::move(r));
    }
    doc["records"] = std::move(recs);
    return doc;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
    write_text_file(path, render_json(manifest_to_json(manifest)));
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string render_cell(const Cell& cell) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Missing>) {
                return "NA";
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                return std::to_string(v);
            } else if constexpr (std::is_same_v<T, double>) {
                return format_number(v);
            } else {
                return v;
            }
        },
        cell);
}

nlohmann::json round_floats(const nlohmann::json& doc) {
    if (doc.is_number_float()) {
        const double v = doc.get<double>();
        if (!std::isfinite(v)) return nullptr;
        return *parse_double(format_number(v));
    }
    if (doc.is_array()) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& item : doc) out.push_back(round_floats(item));
        return out;
    }
    if (doc.is_object()) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [key, value] : doc.items()) out[key] = round_floats(value);
        return out;
    }
    return doc;
}

}  // namespace

std::string render_csv(const Table& table) {
    std::string out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c > 0) out += ',';
        out += table.columns[c];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size()) throw ParamError("CSV payload is not rectangular");
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c > 0) out += ',';
            out += render_cell(row[c]);
        }
        out += '\n';
    }
    return out;
}

nlohmann::json table_to_json(const Table& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size()) throw ParamError("table payload is not rectangular");
        nlohmann::json obj = nlohmann::json::object();
        for (std::size_t c = 0; c < row.size(); ++c) {
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, Missing>) {
                        obj[table.columns[c]] = nullptr;
                    } else {
                        obj[table.columns[c]] = v;
                    }
                },
                row[c]);
        }
        rows.push_back(std::move(obj));
    }
    return nlohmann::json{{"columns", table.columns}, {"rows", rows}};
}

std::string render_json(const nlohmann::json& doc) { return round_floats(doc).dump(2) + "\n"; }

void emit_report(const Table& table, const fs::path& path, ReportFormat format) {
    write_text_file(path, format == ReportFormat::csv ? render_csv(table) : render_json(table_to_json(table)));
}

void emit_report(const nlohmann::json& doc, const fs::path& path) { write_text_file(path, render_json(doc)); }

int CsvTable::column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == name) return static_cast<int>(i);
    }
    return -1;
}

CsvTable parse_csv(std::string_view text) {
    auto split_fields = [](std::string_view line) {
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            fields.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        return fields;
    };

    CsvTable table;
    const auto lines = split_lines(text);
    bool header = true;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string_view line = trim(lines[i]);
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (header) {
            table.columns = std::move(fields);
            header = false;
            continue;
        }
        if (fields.size() != table.columns.size()) {
            throw FormatError("CSV line " + std::to_string(i + 1) + ": expected " + std::to_string(table.columns.size()) +
                              " fields, got " + std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
    }
    if (header) throw FormatError("CSV: missing header row");
    return table;
}

CsvTable read_csv(const fs::path& path) { return parse_csv(read_text_file(path)); }

}  // namespace cvfusion
