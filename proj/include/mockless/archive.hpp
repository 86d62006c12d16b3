#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mockless::archive {

struct ZipEntry {
    std::string name;
    std::vector<std::uint8_t> data;
};

/// Reads every file entry of a zip/jar archive (stored or deflated). Throws
/// std::runtime_error on corrupt archives or unsupported features (zip64).
std::vector<ZipEntry> read_zip(const std::string& path);

/// Members of a compiled class as recovered from its class-file metadata.
struct ClassFileMember {
    std::string name;
    std::vector<std::string> param_types;  // dotted FQN spelling, arrays as "T[]"
    std::string return_type;
    std::uint16_t access = 0;
};

struct ClassFileInfo {
    std::string fqn;         // dotted; nested classes joined with '.'
    std::string binary_name; // dotted with '$' kept
    std::string super_name;  // empty for java.lang.Object / interfaces without super
    std::vector<std::string> interfaces;
    std::uint16_t access = 0;        // effective access (InnerClasses-aware)
    bool is_nested = false;
    bool is_anonymous_or_local = false;
    std::vector<ClassFileMember> fields;
    std::vector<ClassFileMember> methods;  // includes "<init>"
};

constexpr std::uint16_t kAccPublic = 0x0001;
constexpr std::uint16_t kAccPrivate = 0x0002;
constexpr std::uint16_t kAccProtected = 0x0004;
constexpr std::uint16_t kAccStatic = 0x0008;
constexpr std::uint16_t kAccFinal = 0x0010;
constexpr std::uint16_t kAccBridge = 0x0040;
constexpr std::uint16_t kAccInterface = 0x0200;
constexpr std::uint16_t kAccAbstract = 0x0400;
constexpr std::uint16_t kAccSynthetic = 0x1000;
constexpr std::uint16_t kAccAnnotation = 0x2000;
constexpr std::uint16_t kAccEnum = 0x4000;

/// Parses a JVM class file. Throws std::runtime_error when malformed.
ClassFileInfo parse_class_file(const std::vector<std::uint8_t>& bytes);

/// Converts a field descriptor ("Ljava/lang/String;", "[I") into dotted Java
/// spelling ("java.lang.String", "int[]"). Nested '$' becomes '.'.
std::string descriptor_to_type(std::string_view descriptor);

}  // namespace mockless::archive
