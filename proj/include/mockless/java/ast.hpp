#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mockless::java {

/// A type as written in source. `name` is dotted and carries no generic
/// arguments; those live in `args`.
struct TypeRef {
    std::string name;
    std::vector<TypeRef> args;
    int array_dims = 0;
    int line = 0;
    int column = 0;

    bool empty() const { return name.empty(); }
    /// Erased spelling: name plus one "[]" per dimension.
    std::string erased() const;
    bool is_primitive() const;
};

struct Stmt;
struct TypeDecl;

enum class ExprKind {
    Name,         // text = identifier
    Literal,      // text = literal spelling
    FieldAccess,  // target.text
    Call,         // target?.text(args)
    New,          // new type(args) [anon_body]
    NewArray,     // new type[dims] / new type[]{...}; args = dims or initializer elements
    ArrayInit,    // {a, b}
    Unary,        // text = operator; args[0]; postfix when `postfix`
    Binary,       // args[0] text args[1]
    Assign,       // args[0] text args[1]
    Conditional,  // args[0] ? args[1] : args[2]
    Cast,         // (type) args[0]
    InstanceOf,   // args[0] instanceof type [binding in text]
    ArrayAccess,  // args[0][args[1]]
    Lambda,       // params in lambda_params, body either args[0] or lambda_block
    MethodRef,    // target::text
    ClassLiteral, // type.class
    This,
    Super,
    SwitchExpr,   // selector args[0]; cases in switch_stmt
};

struct Expr {
    ExprKind kind = ExprKind::Name;
    std::string text;
    std::unique_ptr<Expr> target;
    std::vector<std::unique_ptr<Expr>> args;
    TypeRef type;
    bool postfix = false;
    std::shared_ptr<TypeDecl> anon_body;  // anonymous class body for New
    std::vector<std::string> lambda_params;
    std::shared_ptr<Stmt> lambda_block;
    std::shared_ptr<Stmt> switch_stmt;
    int line = 0;
    int column = 0;
    std::size_t tok_begin = 0;
    std::size_t tok_end = 0;
};

enum class StmtKind {
    Block,
    LocalVar,
    Expression,
    If,
    While,
    DoWhile,
    For,
    ForEach,
    Switch,
    Try,
    Return,
    Throw,
    Break,
    Continue,
    Empty,
    Labeled,
    Synchronized,
    LocalClass,
    Yield,
    Assert,
    ExplicitCtorCall,
};

struct VarDeclarator {
    std::string name;
    int extra_dims = 0;
    std::unique_ptr<Expr> init;
    int line = 0;
};

struct SwitchCase {
    std::vector<std::unique_ptr<Expr>> labels;
    bool is_default = false;
    bool arrow = false;
    std::vector<std::unique_ptr<Stmt>> body;
    int line = 0;
};

struct CatchClause {
    std::vector<TypeRef> types;
    std::string var;
    std::unique_ptr<Stmt> body;
    int line = 0;
};

struct Stmt {
    StmtKind kind = StmtKind::Empty;
    int line = 0;
    int end_line = 0;
    std::size_t tok_begin = 0;
    std::size_t tok_end = 0;

    // LocalVar / ForEach variable
    TypeRef var_type;
    std::vector<VarDeclarator> vars;

    // Expression / Return / Throw / Yield value; If/While/Do/For condition; Switch selector
    std::unique_ptr<Expr> expr;

    // Block statements, For init statements, Try resources
    std::vector<std::unique_ptr<Stmt>> children;

    std::unique_ptr<Stmt> then_branch;
    std::unique_ptr<Stmt> else_branch;
    std::unique_ptr<Stmt> body;  // loops, labeled, synchronized, try block
    std::vector<std::unique_ptr<Expr>> updates;
    std::vector<SwitchCase> cases;
    std::vector<CatchClause> catches;
    std::unique_ptr<Stmt> finally_block;
    std::string label;
    std::shared_ptr<TypeDecl> local_class;
};

enum class TypeKind { Class, Interface, Enum, Record, Annotation };

struct Param {
    TypeRef type;
    std::string name;
    bool varargs = false;
};

struct MethodDecl {
    std::string name;
    bool is_constructor = false;
    std::vector<std::string> modifiers;
    std::vector<std::string> annotations;
    TypeRef return_type;  // empty for constructors
    std::vector<Param> params;
    std::vector<TypeRef> throws;
    std::unique_ptr<Stmt> body;  // null for abstract/native methods
    int line = 0;
    int end_line = 0;
    std::size_t tok_begin = 0;
    std::size_t tok_end = 0;

    bool has_modifier(const std::string& m) const;
    bool has_annotation(const std::string& simple_name) const;
};

struct FieldDecl {
    std::vector<std::string> modifiers;
    TypeRef type;
    std::vector<VarDeclarator> vars;
    int line = 0;

    bool has_modifier(const std::string& m) const;
};

struct TypeDecl {
    TypeKind kind = TypeKind::Class;
    std::string name;
    std::vector<std::string> modifiers;
    std::vector<std::string> annotations;
    std::vector<TypeRef> extends;  // superclass (classes) or super-interfaces (interfaces)
    std::vector<TypeRef> implements;
    std::vector<FieldDecl> fields;
    std::vector<MethodDecl> methods;
    std::vector<std::shared_ptr<TypeDecl>> nested;
    std::vector<std::string> enum_constants;
    std::vector<Param> record_components;
    int line = 0;
    int end_line = 0;

    bool has_modifier(const std::string& m) const;
};

struct ImportDecl {
    std::string name;
    bool is_static = false;
    bool wildcard = false;
    int line = 0;
};

struct CompilationUnit {
    std::string package;
    std::vector<ImportDecl> imports;
    std::vector<std::shared_ptr<TypeDecl>> types;
};

}  // namespace mockless::java
