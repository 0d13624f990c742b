# Core module init
