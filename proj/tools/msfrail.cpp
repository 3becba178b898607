// Placeholder entry point; subcommands land once the library modules exist.
int main() { return 0; }
