#include "qfusion/npy.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace qfusion::npy {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::uint16_t le16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t le32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::vector<std::uint8_t> inflate_raw(std::span<const std::uint8_t> in,
                                      std::size_t expected_size) {
    std::vector<std::uint8_t> out(expected_size);
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) fail("zip: inflateInit failed");
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.total_out != expected_size)
        fail("zip: deflate stream corrupt or size mismatch");
    return out;
}

}  // namespace

NpyArray parse_npy_u8(std::span<const std::uint8_t> bytes) {
    static const std::uint8_t magic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
    if (bytes.size() < 10 || std::memcmp(bytes.data(), magic, 6) != 0)
        fail("npy: missing \\x93NUMPY magic");
    const int major = bytes[6], minor = bytes[7];
    if (major != 1 || minor != 0)
        fail("npy: unsupported format version " + std::to_string(major) + "." +
             std::to_string(minor) + " (need 1.0)");
    const std::size_t header_len = le16(bytes.data() + 8);
    if (10 + header_len > bytes.size()) fail("npy: truncated header");
    const std::string header(reinterpret_cast<const char*>(bytes.data() + 10),
                             header_len);

    auto find_value = [&](const std::string& key) -> std::string {
        const std::size_t kpos = header.find("'" + key + "'");
        if (kpos == std::string::npos) fail("npy: header missing key '" + key + "'");
        std::size_t pos = header.find(':', kpos);
        if (pos == std::string::npos) fail("npy: malformed header");
        ++pos;
        while (pos < header.size() && header[pos] == ' ') ++pos;
        std::size_t end = pos;
        if (header[pos] == '\'') {
            end = header.find('\'', pos + 1);
            if (end == std::string::npos) fail("npy: malformed header string");
            return header.substr(pos + 1, end - pos - 1);
        }
        if (header[pos] == '(') {
            end = header.find(')', pos);
            if (end == std::string::npos) fail("npy: malformed shape tuple");
            return header.substr(pos, end - pos + 1);
        }
        while (end < header.size() && header[end] != ',' && header[end] != '}') ++end;
        return header.substr(pos, end - pos);
    };

    const std::string descr = find_value("descr");
    if (descr != "|u1" && descr != "<u1" && descr != "uint8")
        fail("npy: dtype '" + descr + "' unsupported, expected uint8 (|u1)");
    const std::string fortran = find_value("fortran_order");
    if (fortran.find("True") != std::string::npos)
        fail("npy: fortran_order arrays unsupported");

    NpyArray arr;
    const std::string shape_str = find_value("shape");
    std::size_t pos = 1;  // skip '('
    while (pos < shape_str.size() && shape_str[pos] != ')') {
        while (pos < shape_str.size() && (shape_str[pos] == ' ' || shape_str[pos] == ','))
            ++pos;
        if (pos >= shape_str.size() || shape_str[pos] == ')') break;
        std::size_t end = pos;
        while (end < shape_str.size() && shape_str[end] >= '0' && shape_str[end] <= '9')
            ++end;
        if (end == pos) fail("npy: malformed shape tuple '" + shape_str + "'");
        arr.shape.push_back(std::stoull(shape_str.substr(pos, end - pos)));
        pos = end;
    }

    std::size_t numel = 1;
    for (std::size_t d : arr.shape) numel *= d;
    const std::size_t data_off = 10 + header_len;
    if (bytes.size() - data_off < numel)
        fail("npy: payload has " + std::to_string(bytes.size() - data_off) +
             " bytes, shape needs " + std::to_string(numel));
    arr.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(data_off),
                    bytes.begin() + static_cast<std::ptrdiff_t>(data_off + numel));
    return arr;
}

std::vector<std::uint8_t> serialize_npy_u8(const std::vector<std::size_t>& shape,
                                           std::span<const std::uint8_t> data) {
    std::string shape_str = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        shape_str += std::to_string(shape[i]);
        if (shape.size() == 1 || i + 1 < shape.size()) shape_str += ",";
        if (i + 1 < shape.size()) shape_str += " ";
    }
    shape_str += ")";
    std::string header =
        "{'descr': '|u1', 'fortran_order': False, 'shape': " + shape_str + ", }";
    // pad with spaces so that 10 + len(header) + 1 is a multiple of 64
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');

    std::vector<std::uint8_t> out;
    out.reserve(10 + header.size() + data.size());
    const std::uint8_t magic[8] = {0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0};
    out.insert(out.end(), magic, magic + 8);
    put16(out, static_cast<std::uint16_t>(header.size()));
    out.insert(out.end(), header.begin(), header.end());
    out.insert(out.end(), data.begin(), data.end());
    return out;
}

std::map<std::string, std::vector<std::uint8_t>> read_zip(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("zip: cannot open '" + path + "'");
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    if (buf.size() < 22) fail("zip: '" + path + "' too small to be an archive");

    // End-of-central-directory: scan backwards for PK\x05\x06.
    std::size_t eocd = std::string::npos;
    const std::size_t scan_limit = buf.size() >= 22 + 65536 ? buf.size() - 22 - 65536 : 0;
    for (std::size_t i = buf.size() - 22 + 1; i-- > scan_limit;) {
        if (buf[i] == 0x50 && buf[i + 1] == 0x4B && buf[i + 2] == 0x05 &&
            buf[i + 3] == 0x06) {
            eocd = i;
            break;
        }
    }
    if (eocd == std::string::npos) fail("zip: no end-of-central-directory record");

    const std::uint16_t n_entries = le16(buf.data() + eocd + 10);
    std::size_t cd_off = le32(buf.data() + eocd + 16);

    std::map<std::string, std::vector<std::uint8_t>> members;
    for (std::uint16_t e = 0; e < n_entries; ++e) {
        if (cd_off + 46 > buf.size() || le32(buf.data() + cd_off) != 0x02014B50)
            fail("zip: corrupt central directory");
        const std::uint16_t method = le16(buf.data() + cd_off + 10);
        const std::uint32_t comp_size = le32(buf.data() + cd_off + 20);
        const std::uint32_t uncomp_size = le32(buf.data() + cd_off + 24);
        const std::uint16_t name_len = le16(buf.data() + cd_off + 28);
        const std::uint16_t extra_len = le16(buf.data() + cd_off + 30);
        const std::uint16_t comment_len = le16(buf.data() + cd_off + 32);
        const std::uint32_t local_off = le32(buf.data() + cd_off + 42);
        const std::string name(reinterpret_cast<const char*>(buf.data() + cd_off + 46),
                               name_len);

        if (local_off + 30 > buf.size() || le32(buf.data() + local_off) != 0x04034B50)
            fail("zip: corrupt local header for member '" + name + "'");
        const std::uint16_t local_name_len = le16(buf.data() + local_off + 26);
        const std::uint16_t local_extra_len = le16(buf.data() + local_off + 28);
        const std::size_t data_off = local_off + 30 + local_name_len + local_extra_len;
        if (data_off + comp_size > buf.size())
            fail("zip: member '" + name + "' truncated");

        std::span<const std::uint8_t> raw(buf.data() + data_off, comp_size);
        if (method == 0) {
            members[name].assign(raw.begin(), raw.end());
        } else if (method == 8) {
            members[name] = inflate_raw(raw, uncomp_size);
        } else {
            fail("zip: member '" + name + "' uses unsupported compression method " +
                 std::to_string(method));
        }
        cd_off += 46u + name_len + extra_len + comment_len;
    }
    return members;
}

void write_zip_stored(
    const std::string& path,
    const std::vector<std::pair<std::string, std::vector<std::uint8_t>>>& members) {
    std::vector<std::uint8_t> out;
    struct Entry {
        std::string name;
        std::uint32_t crc, size, offset;
    };
    std::vector<Entry> entries;

    for (const auto& [name, data] : members) {
        Entry e;
        e.name = name;
        e.size = static_cast<std::uint32_t>(data.size());
        e.crc = static_cast<std::uint32_t>(
            crc32(0L, data.data(), static_cast<uInt>(data.size())));
        e.offset = static_cast<std::uint32_t>(out.size());
        put32(out, 0x04034B50);
        put16(out, 20);      // version needed
        put16(out, 0);       // flags
        put16(out, 0);       // method: stored
        put16(out, 0);       // mod time
        put16(out, 0);       // mod date
        put32(out, e.crc);
        put32(out, e.size);  // compressed
        put32(out, e.size);  // uncompressed
        put16(out, static_cast<std::uint16_t>(name.size()));
        put16(out, 0);       // extra len
        out.insert(out.end(), name.begin(), name.end());
        out.insert(out.end(), data.begin(), data.end());
        entries.push_back(e);
    }

    const std::uint32_t cd_start = static_cast<std::uint32_t>(out.size());
    for (const Entry& e : entries) {
        put32(out, 0x02014B50);
        put16(out, 20);  // version made by
        put16(out, 20);  // version needed
        put16(out, 0);
        put16(out, 0);   // method
        put16(out, 0);
        put16(out, 0);
        put32(out, e.crc);
        put32(out, e.size);
        put32(out, e.size);
        put16(out, static_cast<std::uint16_t>(e.name.size()));
        put16(out, 0);
        put16(out, 0);
        put16(out, 0);
        put16(out, 0);
        put32(out, 0);
        put32(out, e.offset);
        out.insert(out.end(), e.name.begin(), e.name.end());
    }
    const std::uint32_t cd_size = static_cast<std::uint32_t>(out.size()) - cd_start;
    put32(out, 0x06054B50);
    put16(out, 0);
    put16(out, 0);
    put16(out, static_cast<std::uint16_t>(entries.size()));
    put16(out, static_cast<std::uint16_t>(entries.size()));
    put32(out, cd_size);
    put32(out, cd_start);
    put16(out, 0);

    std::ofstream f(path, std::ios::binary);
    if (!f) fail("zip: cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(out.data()),
            static_cast<std::streamsize>(out.size()));
    if (!f) fail("zip: write failed for '" + path + "'");
}

}  // namespace qfusion::npy
