#include "slidepp/app/commands.hpp"

int main(int argc, char** argv) { return slidepp::app::run_cli(argc, argv); }
