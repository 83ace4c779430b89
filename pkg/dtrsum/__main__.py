from dtrsum.main import cli

cli(prog_name="dtrsum")
