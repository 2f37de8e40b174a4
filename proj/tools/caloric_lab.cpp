#include "lab.hpp"

int main(int argc, char** argv) { return caloric::lab::run(argc, argv); }
