# This file makes 'reporting' a package.