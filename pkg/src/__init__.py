# This file makes 'src' a package.