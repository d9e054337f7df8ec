// Builds the amalgamated Catch2 implementation (with its default main) once.
#include <catch2/catch_amalgamated.cpp>
