#include "mockless/archive.hpp"

#include <zlib.h>

#include <fstream>
#include <iterator>
#include <stdexcept>

namespace mockless::archive {

namespace {

std::uint16_t le16(const std::vector<std::uint8_t>& b, std::size_t at) {
    if (at + 2 > b.size()) throw std::runtime_error("truncated zip structure");
    return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t le32(const std::vector<std::uint8_t>& b, std::size_t at) {
    if (at + 4 > b.size()) throw std::runtime_error("truncated zip structure");
    return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
           (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::vector<std::uint8_t> inflate_raw(const std::uint8_t* data, std::size_t size, std::size_t expected) {
    std::vector<std::uint8_t> out(expected);
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw std::runtime_error("inflateInit2 failed");
    zs.next_in = const_cast<Bytef*>(data);
    zs.avail_in = static_cast<uInt>(size);
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END) throw std::runtime_error("corrupt deflate stream");
    out.resize(zs.total_out);
    return out;
}

class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t>& b) : b_(b) {}
    std::uint8_t u1() {
        need(1);
        return b_[pos_++];
    }
    std::uint16_t u2() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>((b_[pos_] << 8) | b_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::uint32_t u4() {
        std::uint32_t hi = u2();
        return (hi << 16) | u2();
    }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s(b_.begin() + static_cast<long>(pos_), b_.begin() + static_cast<long>(pos_ + n));
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > b_.size()) throw std::runtime_error("truncated class file");
    }
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

std::string binary_to_dotted(std::string_view internal) {
    std::string s(internal);
    for (char& c : s)
        if (c == '/') c = '.';
    return s;
}

std::string nested_to_dots(std::string s) {
    for (char& c : s)
        if (c == '$') c = '.';
    return s;
}

// Parses one type from a descriptor starting at `pos`; advances `pos`.
std::string parse_one(std::string_view d, std::size_t& pos) {
    int dims = 0;
    while (pos < d.size() && d[pos] == '[') {
        ++dims;
        ++pos;
    }
    if (pos >= d.size()) throw std::runtime_error("bad descriptor");
    std::string base;
    char c = d[pos++];
    switch (c) {
        case 'B': base = "byte"; break;
        case 'C': base = "char"; break;
        case 'D': base = "double"; break;
        case 'F': base = "float"; break;
        case 'I': base = "int"; break;
        case 'J': base = "long"; break;
        case 'S': base = "short"; break;
        case 'Z': base = "boolean"; break;
        case 'V': base = "void"; break;
        case 'L': {
            auto end = d.find(';', pos);
            if (end == std::string_view::npos) throw std::runtime_error("bad descriptor");
            base = nested_to_dots(binary_to_dotted(d.substr(pos, end - pos)));
            pos = end + 1;
            break;
        }
        default:
            throw std::runtime_error("bad descriptor");
    }
    for (int i = 0; i < dims; ++i) base += "[]";
    return base;
}

}  // namespace

std::string descriptor_to_type(std::string_view descriptor) {
    std::size_t pos = 0;
    return parse_one(descriptor, pos);
}

std::vector<ZipEntry> read_zip(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open archive " + path);
    std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (b.size() < 22) throw std::runtime_error("not a zip archive: " + path);

    // End of central directory: scan back over a possible comment.
    std::size_t eocd = std::string::npos;
    std::size_t lowest = b.size() > 22 + 65535 ? b.size() - 22 - 65535 : 0;
    for (std::size_t i = b.size() - 22 + 1; i-- > lowest;) {
        if (le32(b, i) == 0x06054b50) {
            eocd = i;
            break;
        }
    }
    if (eocd == std::string::npos) throw std::runtime_error("no central directory in " + path);
    std::uint16_t count = le16(b, eocd + 10);
    std::uint32_t cd_offset = le32(b, eocd + 16);
    if (count == 0xffff || cd_offset == 0xffffffff) throw std::runtime_error("zip64 archives are not supported: " + path);

    std::vector<ZipEntry> out;
    std::size_t p = cd_offset;
    for (std::uint16_t i = 0; i < count; ++i) {
        if (le32(b, p) != 0x02014b50) throw std::runtime_error("corrupt central directory in " + path);
        std::uint16_t method = le16(b, p + 10);
        std::uint32_t csize = le32(b, p + 20);
        std::uint32_t usize = le32(b, p + 24);
        std::uint16_t name_len = le16(b, p + 28);
        std::uint16_t extra_len = le16(b, p + 30);
        std::uint16_t comment_len = le16(b, p + 32);
        std::uint32_t local = le32(b, p + 42);
        if (p + 46 + name_len > b.size()) throw std::runtime_error("corrupt central directory in " + path);
        std::string name(b.begin() + static_cast<long>(p + 46), b.begin() + static_cast<long>(p + 46 + name_len));
        p += 46 + name_len + extra_len + comment_len;
        if (name.empty() || name.back() == '/') continue;

        if (le32(b, local) != 0x04034b50) throw std::runtime_error("corrupt local header in " + path);
        std::size_t data_at = local + 30 + le16(b, local + 26) + le16(b, local + 28);
        if (data_at + csize > b.size()) throw std::runtime_error("truncated entry " + name + " in " + path);
        ZipEntry e;
        e.name = std::move(name);
        if (method == 0) {
            e.data.assign(b.begin() + static_cast<long>(data_at), b.begin() + static_cast<long>(data_at + csize));
        } else if (method == 8) {
            e.data = inflate_raw(b.data() + data_at, csize, usize);
        } else {
            throw std::runtime_error("unsupported compression method in " + path);
        }
        out.push_back(std::move(e));
    }
    return out;
}

ClassFileInfo parse_class_file(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    if (r.u4() != 0xCAFEBABE) throw std::runtime_error("bad class file magic");
    r.u2();
    r.u2();
    std::uint16_t cp_count = r.u2();
    std::vector<std::string> utf8(cp_count);
    std::vector<std::uint16_t> class_name_idx(cp_count, 0);
    for (std::uint16_t i = 1; i < cp_count; ++i) {
        std::uint8_t tag = r.u1();
        switch (tag) {
            case 1: utf8[i] = r.bytes(r.u2()); break;
            case 7: class_name_idx[i] = r.u2(); break;
            case 8: case 16: case 19: case 20: r.skip(2); break;
            case 15: r.skip(3); break;
            case 3: case 4: case 9: case 10: case 11: case 12: case 17: case 18: r.skip(4); break;
            case 5: case 6:
                r.skip(8);
                ++i;
                break;
            default:
                throw std::runtime_error("bad constant pool tag " + std::to_string(tag));
        }
    }
    auto class_name = [&](std::uint16_t idx) -> std::string {
        if (idx == 0 || idx >= cp_count) return {};
        return binary_to_dotted(utf8[class_name_idx[idx]]);
    };
    auto text = [&](std::uint16_t idx) -> const std::string& {
        if (idx >= cp_count) throw std::runtime_error("bad constant pool index");
        return utf8[idx];
    };

    ClassFileInfo info;
    info.access = r.u2();
    std::uint16_t this_idx = r.u2();
    info.binary_name = class_name(this_idx);
    info.fqn = nested_to_dots(info.binary_name);
    info.super_name = nested_to_dots(class_name(r.u2()));
    std::uint16_t n_if = r.u2();
    for (std::uint16_t i = 0; i < n_if; ++i) info.interfaces.push_back(nested_to_dots(class_name(r.u2())));

    auto skip_attributes = [&]() {
        std::uint16_t n = r.u2();
        for (std::uint16_t i = 0; i < n; ++i) {
            r.u2();
            r.skip(r.u4());
        }
    };

    std::uint16_t n_fields = r.u2();
    for (std::uint16_t i = 0; i < n_fields; ++i) {
        ClassFileMember f;
        f.access = r.u2();
        f.name = text(r.u2());
        f.return_type = descriptor_to_type(text(r.u2()));
        skip_attributes();
        info.fields.push_back(std::move(f));
    }
    std::uint16_t n_methods = r.u2();
    for (std::uint16_t i = 0; i < n_methods; ++i) {
        ClassFileMember m;
        m.access = r.u2();
        m.name = text(r.u2());
        const std::string& desc = text(r.u2());
        std::size_t pos = 1;
        if (desc.empty() || desc[0] != '(') throw std::runtime_error("bad method descriptor");
        while (pos < desc.size() && desc[pos] != ')') m.param_types.push_back(parse_one(desc, pos));
        ++pos;
        m.return_type = parse_one(desc, pos);
        skip_attributes();
        info.methods.push_back(std::move(m));
    }

    // InnerClasses carries the source-level access flags of nested classes.
    bool inner_non_static = false;
    std::string outer_binary;
    std::uint16_t n_attrs = r.u2();
    for (std::uint16_t a = 0; a < n_attrs; ++a) {
        const std::string& attr = text(r.u2());
        std::uint32_t len = r.u4();
        if (attr != "InnerClasses") {
            r.skip(len);
            continue;
        }
        std::uint16_t n = r.u2();
        for (std::uint16_t k = 0; k < n; ++k) {
            std::uint16_t inner_idx = r.u2();
            std::uint16_t outer_idx = r.u2();
            std::uint16_t name_idx = r.u2();
            std::uint16_t flags = r.u2();
            if (inner_idx == this_idx) {
                info.is_nested = true;
                info.is_anonymous_or_local = outer_idx == 0 || name_idx == 0;
                info.access = flags;
                inner_non_static = (flags & kAccStatic) == 0 && (flags & kAccInterface) == 0;
                outer_binary = class_name(outer_idx);
            }
        }
    }
    // Non-static inner class constructors take the outer instance first.
    if (inner_non_static && !outer_binary.empty()) {
        std::string outer = nested_to_dots(outer_binary);
        for (auto& m : info.methods) {
            if (m.name == "<init>" && !m.param_types.empty() && m.param_types.front() == outer)
                m.param_types.erase(m.param_types.begin());
        }
    }
    return info;
}

}  // namespace mockless::archive
