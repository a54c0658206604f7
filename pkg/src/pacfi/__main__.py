from pacfi.cli import main

main()
