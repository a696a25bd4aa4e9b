#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "llmsec/source_model.hpp"

using namespace llmsec;

TEST_CASE("module names from paths") {
    CHECK(module_name_from_path("a.py") == "a");
    CHECK(module_name_from_path("pkg/tool.py") == "pkg.tool");
    CHECK(module_name_from_path("pkg/__init__.py") == "pkg");
    CHECK(module_name_from_path("pkg/sub/mod.py") == "pkg.sub.mod");
}

TEST_CASE("qname visibility") {
    CHECK(qname_is_public("pkg.tool.Thing.run"));
    CHECK_FALSE(qname_is_public("pkg.tool.Thing._run"));
    CHECK_FALSE(qname_is_public("pkg._internal.f"));
}

TEST_CASE("minimal function parses") {
    const auto parsed = parse_unit("a.py", "def f(): pass\n");
    CHECK(parsed.unit.module_name == "a");
    CHECK(parsed.unit.syntax_ok);
    REQUIRE(parsed.functions.size() == 1);
    CHECK(parsed.functions[0].qname == "a.f");
    CHECK(parsed.functions[0].is_public);
}

TEST_CASE("malformed input flips syntax_ok without throwing") {
    const auto parsed = parse_unit("b.py", "def f(:\n");
    CHECK_FALSE(parsed.unit.syntax_ok);
    CHECK(parsed.functions.empty());
}

TEST_CASE("class body with sink call is fully indexed") {
    const std::string body =
        "class T:\n"
        "    def _run(self, q):\n"
        "        exec(q)\n";
    const auto parsed = parse_unit("pkg/tool.py", body);
    REQUIRE(parsed.unit.syntax_ok);
    REQUIRE(parsed.functions.size() == 1);
    const FunctionRecord& fn = parsed.functions[0];
    CHECK(fn.qname == "pkg.tool.T._run");
    CHECK_FALSE(fn.is_public);
    REQUIRE(fn.enclosing_class.has_value());
    CHECK(*fn.enclosing_class == "pkg.tool.T");
    CHECK(fn.params == std::vector<std::string>{"self", "q"});
    REQUIRE(fn.call_sites.size() == 1);
    CHECK(fn.call_sites[0].callee_expr == "exec");
    CHECK(fn.call_sites[0].arg_count == 1);

    REQUIRE(parsed.classes.size() == 1);
    CHECK(parsed.classes[0].qname == "pkg.tool.T");
    CHECK(parsed.classes[0].methods.at("_run") == "pkg.tool.T._run");
}

TEST_CASE("one-line method body") {
    const auto parsed =
        parse_unit("pkg/tool.py", "class T:\n def _run(self,q): exec(q)\n");
    REQUIRE(parsed.unit.syntax_ok);
    REQUIRE(parsed.functions.size() == 1);
    CHECK(parsed.functions[0].qname == "pkg.tool.T._run");
    REQUIRE(parsed.functions[0].call_sites.size() == 1);
    CHECK(parsed.functions[0].call_sites[0].callee_expr == "exec");
}

TEST_CASE("imports and aliases") {
    const std::string body =
        "import os as o\n"
        "import subprocess\n"
        "from pkg.tools import Tool as T, helper\n"
        "from . import sibling\n";
    const auto parsed = parse_unit("pkg/agent.py", body);
    REQUIRE(parsed.unit.syntax_ok);
    REQUIRE(parsed.imports.size() == 5);
    CHECK(parsed.imports[0].local_alias == "o");
    CHECK(parsed.imports[0].target == "os");
    CHECK(parsed.imports[1].local_alias == "subprocess");
    CHECK(parsed.imports[1].target == "subprocess");
    CHECK(parsed.imports[2].local_alias == "T");
    CHECK(parsed.imports[2].target == "pkg.tools.Tool");
    CHECK(parsed.imports[3].local_alias == "helper");
    CHECK(parsed.imports[3].target == "pkg.tools.helper");
    CHECK(parsed.imports[4].local_alias == "sibling");
    CHECK(parsed.imports[4].target == "pkg.sibling");
}

TEST_CASE("call sites capture nested argument calls and name refs") {
    const std::string body =
        "def build(df):\n"
        "    tools = [Tool(locals={\"df\": df})]\n"
        "    return Executor(agent=make_agent(), tools=tools)\n";
    const auto parsed = parse_unit("m.py", body);
    REQUIRE(parsed.unit.syntax_ok);
    const FunctionRecord& fn = parsed.functions[0];

    REQUIRE(fn.call_sites.size() == 3);
    CHECK(fn.call_sites[0].callee_expr == "Tool");
    CHECK(fn.call_sites[1].callee_expr == "make_agent");
    CHECK(fn.call_sites[2].callee_expr == "Executor");

    const CallSiteRecord& executor = fn.call_sites[2];
    REQUIRE(executor.arg_callees.size() == 1);
    CHECK(executor.arg_callees[0] == "make_agent");
    CHECK(std::find(executor.arg_name_refs.begin(),
                    executor.arg_name_refs.end(),
                    "tools") != executor.arg_name_refs.end());
    CHECK(executor.arg_count == 2);

    REQUIRE(fn.ctor_aliases.count("tools"));
    CHECK(fn.ctor_aliases.at("tools") == std::vector<std::string>{"Tool"});
}

TEST_CASE("chained attribute call records the base call only") {
    const auto parsed =
        parse_unit("m.py", "def f(payload):\n    return o.popen(payload).read()\n");
    REQUIRE(parsed.unit.syntax_ok);
    const FunctionRecord& fn = parsed.functions[0];
    REQUIRE(fn.call_sites.size() == 1);
    CHECK(fn.call_sites[0].callee_expr == "o.popen");
}

TEST_CASE("build_index cross references instantiations") {
    std::vector<std::pair<std::string, std::string>> files = {
        {"pkg/tool.py", "class Tool:\n    def _run(self, q):\n        exec(q)\n"},
        {"pkg/agent.py",
         "from pkg.tool import Tool\n"
         "def make(prompt):\n"
         "    t = Tool()\n"
         "    return t\n"},
    };
    const ProgramIndex index = build_index(files);
    REQUIRE(index.classes.count("pkg.tool.Tool"));
    const ClassRecord& cls = index.classes.at("pkg.tool.Tool");
    REQUIRE(cls.instantiation_sites.size() == 1);
    CHECK(cls.instantiation_sites[0].first == "pkg.agent.make");
}

TEST_CASE("token index and identifier-boundary search") {
    std::vector<std::pair<std::string, std::string>> files = {
        {"tool.py", "def f(q):\n    exec(q)\n"},
        {"other.py", "def executor(q):\n    return q\n"},
        {"broken.py", "def g(:\n    eval(x)\n"},
    };
    const ProgramIndex index = build_index(files);

    // "executor" must not surface for token "exec"
    CHECK(token_search(index, "exec") == std::set<std::string>{"tool.py"});
    CHECK(token_search(index, "absent") == std::set<std::string>{});
    // broken files still contribute tokens
    CHECK(token_search(index, "eval") == std::set<std::string>{"broken.py"});
    CHECK_FALSE(index.units.at("broken.py").syntax_ok);
    // but never definitions
    for (const auto& [qname, fn] : index.functions)
        CHECK(fn.location.file != "broken.py");
}

TEST_CASE("narrowing soundness: call site tokens always hit their file") {
    std::vector<std::pair<std::string, std::string>> files = {
        {"a.py", "import b\n\ndef f(text):\n    return b.g(text)\n"},
        {"b.py", "def g(text):\n    eval(text)\n"},
    };
    const ProgramIndex index = build_index(files);
    for (const auto& [qname, fn] : index.functions) {
        for (const CallSiteRecord& cs : fn.call_sites) {
            const auto hits =
                token_search(index, std::string(final_segment(cs.callee_expr)));
            CHECK(hits.count(fn.location.file));
        }
    }
}

TEST_CASE("index_package walks the tree and honors ignore globs") {
    namespace fs = std::filesystem;
    const fs::path root =
        fs::temp_directory_path() / "llmsec_source_model_test";
    fs::remove_all(root);
    fs::create_directories(root / "pkg");
    std::ofstream(root / "pkg" / "a.py") << "def f(q):\n    eval(q)\n";
    std::ofstream(root / "pkg" / "skip_me.py") << "def g(q):\n    eval(q)\n";
    std::ofstream(root / "notes.txt") << "not source\n";

    const ProgramIndex index = index_package(root.string(), {"*skip*"});
    CHECK(index.units.size() == 1);
    CHECK(index.units.count("pkg/a.py"));

    CHECK_THROWS_AS(index_package((root / "missing").string()), IndexError);

    const fs::path empty = root / "empty";
    fs::create_directories(empty);
    CHECK_THROWS_AS(index_package(empty.string()), IndexError);
    fs::remove_all(root);
}

TEST_CASE("deterministic index from shuffled inputs") {
    std::vector<std::pair<std::string, std::string>> files = {
        {"b.py", "def g(x):\n    return x\n"},
        {"a.py", "def f(x):\n    return g(x)\n"},
    };
    const ProgramIndex first = build_index(files);
    std::swap(files[0], files[1]);
    const ProgramIndex second = build_index(files);
    CHECK(first.functions.size() == second.functions.size());
    auto it1 = first.functions.begin();
    auto it2 = second.functions.begin();
    for (; it1 != first.functions.end(); ++it1, ++it2) {
        CHECK(it1->first == it2->first);
        CHECK(it1->second.qname == it2->second.qname);
    }
}

TEST_CASE("decorators and docstrings do not confuse the parser") {
    const std::string body =
        "\"\"\"module docstring\"\"\"\n"
        "import functools\n"
        "\n"
        "@functools.cache\n"
        "def cached(q):\n"
        "    \"\"\"doc\"\"\"\n"
        "    return eval(q)\n";
    const auto parsed = parse_unit("m.py", body);
    REQUIRE(parsed.unit.syntax_ok);
    REQUIRE(parsed.functions.size() == 1);
    REQUIRE(parsed.functions[0].call_sites.size() == 1);
    CHECK(parsed.functions[0].call_sites[0].callee_expr == "eval");
}

TEST_CASE("duplicate parameter names are a parse failure") {
    const auto parsed = parse_unit("m.py", "def f(a, a):\n    pass\n");
    CHECK_FALSE(parsed.unit.syntax_ok);
}
