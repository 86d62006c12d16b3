#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "mockless/java/ast.hpp"
#include "mockless/java/lexer.hpp"

namespace mockless::java {

/// Token stream plus the tree built over it. Statement and expression nodes
/// refer back into `tokens` by index, so both travel together.
struct ParsedUnit {
    std::vector<Token> tokens;
    CompilationUnit unit;
};

struct ParsedMethod {
    std::vector<Token> tokens;
    MethodDecl method;
};

struct ParsedStatements {
    std::vector<Token> tokens;
    std::vector<std::unique_ptr<Stmt>> statements;
};

/// Parses a full compilation unit. Throws ParseError on malformed input.
ParsedUnit parse_compilation_unit(std::string_view source);

/// Parses a single method or constructor declaration, optionally preceded by
/// annotations/modifiers. `first_line` sets the line number of the first line.
ParsedMethod parse_method(std::string_view source, int first_line = 1);

/// Parses a sequence of block statements (no surrounding braces).
ParsedStatements parse_statements(std::string_view source, int first_line = 1);

// ---- traversal helpers -------------------------------------------------------

using ExprVisitor = std::function<void(const Expr&)>;
using StmtVisitor = std::function<void(const Stmt&)>;

/// Pre-order over an expression tree, descending into lambda bodies.
/// Anonymous class bodies are entered only when `into_anonymous` is set.
void walk_expr(const Expr& expr, const ExprVisitor& on_expr, const StmtVisitor& on_stmt = {},
               bool into_anonymous = false);

/// Pre-order over a statement tree, visiting every contained expression.
void walk_stmt(const Stmt& stmt, const StmtVisitor& on_stmt, const ExprVisitor& on_expr = {},
               bool into_anonymous = false);

/// Dotted spelling of a Name/FieldAccess chain ("a.b.c"), empty otherwise.
std::string dotted_name(const Expr& expr);

/// Statements of a block in source order, recursing into nested compound
/// statements. Useful for straight-line def-use scans.
std::vector<const Stmt*> flatten_statements(const Stmt& root);

}  // namespace mockless::java
