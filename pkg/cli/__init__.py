# CLI module init
