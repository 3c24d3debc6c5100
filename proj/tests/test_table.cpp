#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cogload/error.hpp"
#include "cogload/table.hpp"

using namespace cogload;

namespace {

Table parse(const std::string& text) {
    std::istringstream in(text);
    return Table::read_csv(in);
}

}  // namespace

TEST_SUITE("table") {

TEST_CASE("reads numbers and missing values") {
    const Table t = parse("a,b\n1,2.5\n,NA\n-3e2,nan\n");
    CHECK(t.rows() == 3);
    CHECK(t.cols() == 2);
    CHECK(t.column("a")[0] == 1.0);
    CHECK(std::isnan(t.column("a")[1]));
    CHECK(t.column("a")[2] == -300.0);
    CHECK(std::isnan(t.column("b")[1]));
    CHECK(std::isnan(t.column("b")[2]));
}

TEST_CASE("tolerates CRLF and a missing final newline") {
    const Table t = parse("a,b\r\n1,2\r\n3,4");
    CHECK(t.rows() == 2);
    CHECK(t.column("b")[1] == 4.0);
}

TEST_CASE("malformed input names the problem") {
    try {
        parse("a,b\n1,x\n");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("'b'") != std::string::npos);
    }
    CHECK_THROWS_AS(parse("a,b\n1\n"), DataError);
    CHECK_THROWS_AS(parse("a,a\n1,2\n"), DataError);
    CHECK_THROWS_AS(Table::read_csv_file("/nonexistent/panel.csv"), DataError);
    const Table t = parse("a\n1\n");
    try {
        t.column("zz");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("missing column 'zz'") != std::string::npos);
    }
}

TEST_CASE("round trip") {
    Table t;
    t.add_column("x", {0.1, NAN, 3});
    t.add_column("y", {1e-300, 2, -0.5});
    CHECK(t.has_column("y"));
    CHECK_FALSE(t.has_column("z"));
    CHECK_THROWS_AS(t.add_column("z", {1}), DataError);
    std::ostringstream out;
    t.write_csv(out);
    CHECK(out.str() == "x,y\n0.1,1e-300\nNA,2\n3,-0.5\n");
    const Table back = parse(out.str());
    CHECK(back.column("y") == t.column("y"));
}

}
