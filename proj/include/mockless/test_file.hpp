#pragma once

#include <string>
#include <string_view>
#include <vector>

// Text-level edits on a generated test class. Edits keep everything outside
// the touched spans byte-for-byte.

namespace mockless {

struct MethodSpan {
    std::string name;
    bool is_test = false;
    std::size_t begin = 0;  // byte offsets, annotations included
    std::size_t end = 0;
    int line = 0;
    int end_line = 0;
};

/// Methods of the first top-level class. Throws java::ParseError.
std::vector<MethodSpan> method_spans(std::string_view source);

/// `imports` entries look like "a.b.C" or "static a.b.C.m". Existing ones are
/// skipped; new lines go after the last import (or the package line).
std::string add_imports(std::string_view source, const std::vector<std::string>& imports);

/// Imports of a compilation unit in the same "static x" spelling.
std::vector<std::string> imports_of(std::string_view source);

/// Appends a method before the class's closing brace. A name clash is
/// resolved by suffixing _2, _3, ...; the name actually used is returned.
std::string append_method(std::string_view source, std::string_view method, std::string* used_name = nullptr);

std::string remove_method(std::string_view source, const std::string& name);
std::string replace_method(std::string_view source, const std::string& name, std::string_view method);
/// Source text of one method, empty when absent.
std::string method_text(std::string_view source, const std::string& name);

/// Name of the first method declared in a method snippet.
std::string method_name(std::string_view method);
std::string rename_method(std::string_view method, const std::string& new_name);

/// The file's package and imports plus `imports`, wrapping only `method` in a
/// class of the same name. Used to check one test in isolation.
std::string standalone_unit(std::string_view file_source, std::string_view method, const std::vector<std::string>& imports);

/// Simple name of the first top-level class.
std::string class_name_of(std::string_view source);

}  // namespace mockless
