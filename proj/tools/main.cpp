#include "vdn/cli.hpp"

int main(int argc, char** argv) { return vdn::dispatch(argc, argv); }
