#include "safepatch/dataset_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace safepatch {

void validate_record(const DatasetPair& rec) {
    rec.prompt.validate();
    rec.condition.validate();
    if (rec.is_benign != rec.condition.is_no_op())
        throw InvalidConfigError("record: is_benign flag must match NO_OP condition");
    if (rec.image.shape() != Shape{1, kImageSize, kImageSize})
        throw InvalidImageError("record: image must be [1,16,16]");
    for (int64_t i = 0; i < rec.image.numel(); ++i) {
        const double v = rec.image.data()[i];
        if (!(v >= -1.0 && v <= 1.0))
            throw InvalidImageError("record: pixel outside [-1,1]");
    }
}

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

std::string image_to_hex(const Tensor& img) {
    std::string out;
    out.reserve(static_cast<size_t>(img.numel()) * 8);
    for (int64_t i = 0; i < img.numel(); ++i) {
        const float f = static_cast<float>(img.data()[i]);
        uint32_t bits = std::bit_cast<uint32_t>(f);
        // little-endian byte order
        for (int b = 0; b < 4; ++b) {
            const uint8_t byte = static_cast<uint8_t>(bits >> (8 * b));
            out.push_back(kHexDigits[byte >> 4]);
            out.push_back(kHexDigits[byte & 0xF]);
        }
    }
    return out;
}

int hex_val(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

Tensor image_from_hex(const std::string& hex) {
    const size_t n = static_cast<size_t>(kImageSize) * kImageSize;
    if (hex.size() != n * 8)
        throw CorruptFileError("dataset: image block has " + std::to_string(hex.size()) +
                               " hex digits, expected " + std::to_string(n * 8));
    std::vector<double> data(n);
    for (size_t i = 0; i < n; ++i) {
        uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            const int hi = hex_val(hex[i * 8 + b * 2]);
            const int lo = hex_val(hex[i * 8 + b * 2 + 1]);
            if (hi < 0 || lo < 0)
                throw CorruptFileError("dataset: non-hex digit in image block");
            bits |= static_cast<uint32_t>(hi << 4 | lo) << (8 * b);
        }
        data[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return Tensor::from_data({1, kImageSize, kImageSize}, std::move(data));
}

} // namespace

std::string record_to_line(const DatasetPair& rec) {
    validate_record(rec);
    std::ostringstream os;
    os << rec.prompt.str() << "|" << rec.condition.str() << "|" << (rec.is_benign ? 1 : 0) << "|"
       << image_to_hex(rec.image);
    return os.str();
}

DatasetPair record_from_line(const std::string& line) {
    std::vector<std::string> fields;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == '|') {
            fields.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    if (fields.size() != 4)
        throw CorruptFileError("dataset: expected 4 '|'-separated fields, got " +
                               std::to_string(fields.size()));
    DatasetPair rec;
    rec.prompt = PromptTokens(parse_token_list(fields[0]));
    rec.condition = SafetyCondition(parse_token_list(fields[1]));
    if (fields[2] != "0" && fields[2] != "1")
        throw CorruptFileError("dataset: benign flag must be 0 or 1");
    rec.is_benign = fields[2] == "1";
    rec.image = image_from_hex(fields[3]);
    validate_record(rec);
    return rec;
}

void write_dataset(const std::string& path, const std::vector<DatasetPair>& records) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("write_dataset: cannot open " + path);
    for (const auto& rec : records) f << record_to_line(rec) << "\n";
    if (!f)
        throw IoError("write_dataset: write failed for " + path);
}

std::vector<DatasetPair> read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("read_dataset: cannot open " + path);
    std::vector<DatasetPair> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        out.push_back(record_from_line(line));
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("write_text_file: cannot open " + path);
    f << content;
    if (!f)
        throw IoError("write_text_file: write failed for " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("read_text_file: cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

} // namespace safepatch
